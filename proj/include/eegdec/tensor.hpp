#pragma once
// Dense row-major tensor of doubles plus the small set of kernels the rest
// of the library is built on. Desk-scale sizes, 64-bit floats throughout.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace eegdec {

using Shape = std::vector<std::int64_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) {
        if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape)
        : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_numel(shape_)), 0.0) {}

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size()))
            throw ShapeError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor filled(Shape shape, double v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

    // 2D convenience constructor used heavily in tests.
    static Tensor from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) return Tensor({0, 0});
        const auto c = static_cast<std::int64_t>(rows.front().size());
        Tensor t({static_cast<std::int64_t>(rows.size()), c});
        std::int64_t i = 0;
        for (const auto& row : rows) {
            if (static_cast<std::int64_t>(row.size()) != c)
                throw ShapeError("ragged row in from_rows");
            for (std::int64_t j = 0; j < c; ++j) t.at(i, j) = row[static_cast<std::size_t>(j)];
            ++i;
        }
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::int64_t ndim() const { return static_cast<std::int64_t>(shape_.size()); }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    std::int64_t dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }

    std::int64_t rows() const {
        require_ndim(2);
        return shape_[0];
    }
    std::int64_t cols() const {
        require_ndim(2);
        return shape_[1];
    }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    double& at(std::int64_t r, std::int64_t c) {
        return data_[static_cast<std::size_t>(r * shape_[1] + c)];
    }
    double at(std::int64_t r, std::int64_t c) const {
        return data_[static_cast<std::size_t>(r * shape_[1] + c)];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool is_scalar() const { return size() == 1; }
    double scalar_value() const {
        if (!is_scalar()) throw ShapeError("expected scalar, got " + shape_str(shape_));
        return data_[0];
    }

private:
    void require_ndim(int n) const {
        if (ndim() != n)
            throw ShapeError("expected " + std::to_string(n) + "-d tensor, got " + shape_str(shape_));
    }

    Shape shape_;
    std::vector<double> data_;
};

// ---- elementwise helpers ----

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "hadamard");
    Tensor out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

inline Tensor scale(const Tensor& a, double c) {
    Tensor out = a;
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] *= c;
    return out;
}

inline void accumulate(Tensor& into, const Tensor& delta) {
    require_same_shape(into, delta, "accumulate");
    for (std::int64_t i = 0; i < into.size(); ++i) into[i] += delta[i];
}

inline double sum(const Tensor& a) {
    double s = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) s += a[i];
    return s;
}

// ---- matrix kernels ----

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const std::int64_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t kk = 0; kk < k; ++kk) {
            const double aik = pa[i * k + kk];
            if (aik == 0.0) continue;
            const double* brow = pb + kk * n;
            double* orow = po + i * n;
            for (std::int64_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

inline Tensor transpose(const Tensor& a) {
    const std::int64_t m = a.rows(), n = a.cols();
    Tensor out({n, m});
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

inline Tensor col_sums(const Tensor& a) {
    const std::int64_t m = a.rows(), n = a.cols();
    Tensor out({n});
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) out[j] += a.at(i, j);
    return out;
}

// Adds a length-n vector to every row of an m-by-n matrix.
inline Tensor add_row_vector(const Tensor& a, const Tensor& v) {
    if (a.ndim() != 2 || v.ndim() != 1 || v.dim(0) != a.cols())
        throw ShapeError("add_row_vector: " + shape_str(a.shape()) + " + " + shape_str(v.shape()));
    Tensor out = a;
    for (std::int64_t i = 0; i < a.rows(); ++i)
        for (std::int64_t j = 0; j < a.cols(); ++j) out.at(i, j) += v[j];
    return out;
}

// ---- softmax over an arbitrary axis, max-subtracted for stability ----

inline Tensor softmax(const Tensor& x, int axis) {
    if (axis < 0) axis += static_cast<int>(x.ndim());
    if (axis < 0 || axis >= x.ndim())
        throw ShapeError("softmax: axis out of range for " + shape_str(x.shape()));
    std::int64_t outer = 1, inner = 1;
    const std::int64_t n = x.dim(axis);
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);

    Tensor out = x;
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t base = o * n * inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::int64_t k = 0; k < n; ++k) mx = std::max(mx, x[base + k * inner]);
            double denom = 0.0;
            for (std::int64_t k = 0; k < n; ++k) {
                const double e = std::exp(x[base + k * inner] - mx);
                out[base + k * inner] = e;
                denom += e;
            }
            for (std::int64_t k = 0; k < n; ++k) out[base + k * inner] /= denom;
        }
    }
    return out;
}

// ---- layer normalization over the last axis ----

inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (x.ndim() < 1) throw ShapeError("layer_norm: scalar input");
    const std::int64_t n = x.dim(static_cast<int>(x.ndim()) - 1);
    if (gain.ndim() != 1 || bias.ndim() != 1 || gain.dim(0) != n || bias.dim(0) != n)
        throw ShapeError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match last axis of " +
                         shape_str(x.shape()));
    const std::int64_t rows = x.size() / n;
    Tensor out = x;
    for (std::int64_t r = 0; r < rows; ++r) {
        const std::int64_t base = r * n;
        double mean = 0.0;
        for (std::int64_t j = 0; j < n; ++j) mean += x[base + j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            const double d = x[base + j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::int64_t j = 0; j < n; ++j)
            out[base + j] = gain[j] * ((x[base + j] - mean) * inv) + bias[j];
    }
    return out;
}

}  // namespace eegdec
