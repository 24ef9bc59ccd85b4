#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgtn {

/// Dense row-major array of doubles. Rank 0 is a scalar (size 1).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_size(shape_))
            throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_string(shape_));
    }

    static Tensor scalar(double v) { return Tensor({}, {v}); }

    static std::size_t shape_size(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t e : shape) n *= e;
        return n;
    }

    static std::string shape_string(const std::vector<std::size_t>& shape) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << "]";
        return os.str();
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
    double at(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }

    std::vector<std::size_t> strides() const {
        std::vector<std::size_t> s(shape_.size(), 1);
        for (std::size_t i = shape_.size(); i-- > 1;) s[i - 1] = s[i] * shape_[i];
        return s;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

private:
    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != shape_.size()) throw std::invalid_argument("Tensor::at: wrong index rank");
        std::size_t off = 0, axis = 0;
        auto st = strides();
        for (std::size_t i : idx) {
            if (i >= shape_[axis]) throw std::out_of_range("Tensor::at: index out of range");
            off += i * st[axis];
            ++axis;
        }
        return off;
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// Trailing-dimension broadcast shape of two shapes; throws on incompatibility.
inline std::vector<std::size_t> broadcast_shape(const std::vector<std::size_t>& a,
                                                const std::vector<std::size_t>& b) {
    const std::size_t ra = a.size(), rb = b.size(), r = std::max(ra, rb);
    std::vector<std::size_t> out(r, 1);
    for (std::size_t i = 0; i < r; ++i) {
        const std::size_t ea = i < ra ? a[ra - 1 - i] : 1;
        const std::size_t eb = i < rb ? b[rb - 1 - i] : 1;
        if (ea != eb && ea != 1 && eb != 1)
            throw std::invalid_argument("broadcast: incompatible shapes " + Tensor::shape_string(a) +
                                        " and " + Tensor::shape_string(b));
        out[r - 1 - i] = std::max(ea, eb);
    }
    return out;
}

/// Sum `t` down to `shape` (inverse of broadcasting), trailing-aligned.
inline Tensor reduce_to(const Tensor& t, const std::vector<std::size_t>& shape) {
    if (t.shape() == shape) return t;
    Tensor out(shape, 0.0);
    const std::size_t rt = t.rank(), ro = shape.size();
    const auto st = t.strides();
    const auto so = out.strides();
    std::vector<std::size_t> idx(rt, 0);
    for (std::size_t lin = 0; lin < t.size(); ++lin) {
        // map trailing-aligned index into out, collapsing broadcast axes
        std::size_t off = 0;
        for (std::size_t i = 0; i < ro; ++i) {
            const std::size_t ti = rt - 1 - i;     // axis in t, from trailing
            const std::size_t oi = ro - 1 - i;     // axis in out
            const std::size_t iv = i < rt ? idx[ti] : 0;
            off += (shape[oi] == 1 ? 0 : iv) * so[oi];
        }
        out[off] += t[lin];
        for (std::size_t a = rt; a-- > 0;) {
            if (++idx[a] < t.shape()[a]) break;
            idx[a] = 0;
        }
    }
    return out;
}

} // namespace sgtn
