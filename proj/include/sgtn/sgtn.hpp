#pragma once

#include "attention_adjacency.hpp"
#include "autodiff.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "data_io.hpp"
#include "gaussian_head.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "rng.hpp"
#include "social_graph.hpp"
#include "sstgcn.hpp"
#include "svg.hpp"
#include "tensor.hpp"
#include "trainer.hpp"
#include "trajectory.hpp"
#include "transformer.hpp"
