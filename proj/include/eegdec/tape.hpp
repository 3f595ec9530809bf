#pragma once
// Reverse-mode differentiation on an append-only tape. Nodes are created in
// topological order, so backward is a single reverse sweep. Parameters carry
// a stable name for gradient routing; frozen parameters take part in the
// forward pass and propagate gradient to their consumers' other inputs, but
// never appear in the returned gradient map.

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eegdec/activations.hpp"
#include "eegdec/tensor.hpp"

namespace eegdec {

using ValueId = std::int32_t;
using GradMap = std::map<std::string, Tensor>;

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    const Tensor& value(ValueId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    std::size_t node_count() const { return nodes_.size(); }

    ValueId constant(Tensor t) { return push(std::move(t), {}, nullptr); }

    ValueId parameter(std::string name, Tensor t, bool frozen = false) {
        ValueId id = push(std::move(t), {}, nullptr);
        Node& n = nodes_[static_cast<std::size_t>(id)];
        n.param_name = std::move(name);
        n.frozen = frozen;
        return id;
    }

    // ---- arithmetic ----

    ValueId add(ValueId a, ValueId b) {
        Tensor out = eegdec::add(value(a), value(b));
        return push(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
            t.accumulate_grad(a, g);
            t.accumulate_grad(b, g);
        });
    }

    ValueId scale(ValueId a, double c) {
        Tensor out = eegdec::scale(value(a), c);
        return push(std::move(out), {a}, [a, c](Tape& t, const Tensor& g) {
            t.accumulate_grad(a, eegdec::scale(g, c));
        });
    }

    ValueId matmul(ValueId a, ValueId b) {
        Tensor out = eegdec::matmul(value(a), value(b));
        return push(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
            t.accumulate_grad(a, eegdec::matmul(g, eegdec::transpose(t.value(b))));
            t.accumulate_grad(b, eegdec::matmul(eegdec::transpose(t.value(a)), g));
        });
    }

    ValueId transpose(ValueId a) {
        Tensor out = eegdec::transpose(value(a));
        return push(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
            t.accumulate_grad(a, eegdec::transpose(g));
        });
    }

    ValueId add_row_vector(ValueId a, ValueId v) {
        Tensor out = eegdec::add_row_vector(value(a), value(v));
        return push(std::move(out), {a, v}, [a, v](Tape& t, const Tensor& g) {
            t.accumulate_grad(a, g);
            t.accumulate_grad(v, eegdec::col_sums(g));
        });
    }

    ValueId hadamard(ValueId a, ValueId b) {
        Tensor out = eegdec::hadamard(value(a), value(b));
        return push(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
            t.accumulate_grad(a, eegdec::hadamard(g, t.value(b)));
            t.accumulate_grad(b, eegdec::hadamard(g, t.value(a)));
        });
    }

    // Elementwise product with a constant tensor (dropout masks).
    ValueId hadamard_const(ValueId a, Tensor m) {
        Tensor out = eegdec::hadamard(value(a), m);
        return push(std::move(out), {a}, [a, m = std::move(m)](Tape& t, const Tensor& g) {
            t.accumulate_grad(a, eegdec::hadamard(g, m));
        });
    }

    ValueId sum(ValueId a) {
        Tensor out = Tensor::scalar(eegdec::sum(value(a)));
        return push(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
            t.accumulate_grad(a, Tensor::filled(t.value(a).shape(), g[0]));
        });
    }

    // Scalar sum(a .* w) with constant weights; the gradient probe used by
    // the finite-difference tests.
    ValueId weighted_sum(ValueId a, Tensor w) {
        require_same_shape(value(a), w, "weighted_sum");
        double s = 0.0;
        for (std::int64_t i = 0; i < w.size(); ++i) s += value(a)[i] * w[i];
        return push(Tensor::scalar(s), {a}, [a, w = std::move(w)](Tape& t, const Tensor& g) {
            t.accumulate_grad(a, eegdec::scale(w, g[0]));
        });
    }

    // ---- structural ops ----

    ValueId slice_cols(ValueId a, std::int64_t start, std::int64_t width) {
        const Tensor& x = value(a);
        if (start < 0 || start + width > x.cols())
            throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                             std::to_string(start + width) + ") out of " + shape_str(x.shape()));
        Tensor out({x.rows(), width});
        for (std::int64_t i = 0; i < x.rows(); ++i)
            for (std::int64_t j = 0; j < width; ++j) out.at(i, j) = x.at(i, start + j);
        return push(std::move(out), {a}, [a, start, width](Tape& t, const Tensor& g) {
            Tensor da = Tensor::zeros_like(t.value(a));
            for (std::int64_t i = 0; i < g.rows(); ++i)
                for (std::int64_t j = 0; j < width; ++j) da.at(i, start + j) = g.at(i, j);
            t.accumulate_grad(a, da);
        });
    }

    ValueId concat_cols(const std::vector<ValueId>& parts) {
        if (parts.empty()) throw ShapeError("concat_cols: no parts");
        const std::int64_t m = value(parts[0]).rows();
        std::int64_t total = 0;
        for (ValueId p : parts) {
            if (value(p).rows() != m) throw ShapeError("concat_cols: row mismatch");
            total += value(p).cols();
        }
        Tensor out({m, total});
        std::int64_t off = 0;
        for (ValueId p : parts) {
            const Tensor& x = value(p);
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < x.cols(); ++j) out.at(i, off + j) = x.at(i, j);
            off += x.cols();
        }
        return push(std::move(out), parts, [parts](Tape& t, const Tensor& g) {
            std::int64_t off2 = 0;
            for (ValueId p : parts) {
                const std::int64_t w = t.value(p).cols();
                Tensor dp({g.rows(), w});
                for (std::int64_t i = 0; i < g.rows(); ++i)
                    for (std::int64_t j = 0; j < w; ++j) dp.at(i, j) = g.at(i, off2 + j);
                t.accumulate_grad(p, dp);
                off2 += w;
            }
        });
    }

    // Embedding lookup: out row i = table row ids[i].
    ValueId select_rows(ValueId table, std::vector<std::int64_t> ids) {
        const Tensor& tab = value(table);
        Tensor out({static_cast<std::int64_t>(ids.size()), tab.cols()});
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0 || ids[i] >= tab.rows())
                throw std::out_of_range("select_rows: id " + std::to_string(ids[i]) +
                                        " outside table " + shape_str(tab.shape()));
            for (std::int64_t j = 0; j < tab.cols(); ++j)
                out.at(static_cast<std::int64_t>(i), j) = tab.at(ids[i], j);
        }
        return push(std::move(out), {table}, [table, ids = std::move(ids)](Tape& t, const Tensor& g) {
            Tensor dt = Tensor::zeros_like(t.value(table));
            for (std::size_t i = 0; i < ids.size(); ++i)
                for (std::int64_t j = 0; j < g.cols(); ++j)
                    dt.at(ids[i], j) += g.at(static_cast<std::int64_t>(i), j);
            t.accumulate_grad(table, dt);
        });
    }

    // ---- normalization and attention pieces ----

    // Row-wise softmax restricted to positions where mask > 0.5; masked
    // positions get exactly zero weight. A fully masked row stays all-zero.
    ValueId masked_softmax_rows(ValueId scores, Tensor mask) {
        const Tensor& x = value(scores);
        require_same_shape(x, mask, "masked_softmax_rows");
        Tensor out = Tensor::zeros_like(x);
        for (std::int64_t i = 0; i < x.rows(); ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::int64_t j = 0; j < x.cols(); ++j)
                if (mask.at(i, j) > 0.5) mx = std::max(mx, x.at(i, j));
            if (mx == -std::numeric_limits<double>::infinity()) continue;
            double denom = 0.0;
            for (std::int64_t j = 0; j < x.cols(); ++j) {
                if (mask.at(i, j) > 0.5) {
                    const double e = std::exp(x.at(i, j) - mx);
                    out.at(i, j) = e;
                    denom += e;
                }
            }
            for (std::int64_t j = 0; j < x.cols(); ++j) out.at(i, j) /= denom;
        }
        Tensor y = out;  // backward needs the softmax output
        return push(std::move(out), {scores},
                    [scores, mask = std::move(mask), y = std::move(y)](Tape& t, const Tensor& g) {
                        Tensor ds = Tensor::zeros_like(y);
                        for (std::int64_t i = 0; i < y.rows(); ++i) {
                            double dot = 0.0;
                            for (std::int64_t j = 0; j < y.cols(); ++j)
                                dot += g.at(i, j) * y.at(i, j);
                            for (std::int64_t j = 0; j < y.cols(); ++j) {
                                if (mask.at(i, j) > 0.5)
                                    ds.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
                            }
                        }
                        t.accumulate_grad(scores, ds);
                    });
    }

    ValueId layer_norm(ValueId x, ValueId gain, ValueId bias, double eps) {
        Tensor out = eegdec::layer_norm(value(x), value(gain), value(bias), eps);
        return push(std::move(out), {x, gain, bias}, [x, gain, bias, eps](Tape& t, const Tensor& g) {
            const Tensor& in = t.value(x);
            const Tensor& gn = t.value(gain);
            const std::int64_t n = in.dim(static_cast<int>(in.ndim()) - 1);
            const std::int64_t rows = in.size() / n;
            Tensor dx = Tensor::zeros_like(in);
            Tensor dgain({n});
            Tensor dbias({n});
            for (std::int64_t r = 0; r < rows; ++r) {
                const std::int64_t base = r * n;
                double mean = 0.0;
                for (std::int64_t j = 0; j < n; ++j) mean += in[base + j];
                mean /= static_cast<double>(n);
                double var = 0.0;
                for (std::int64_t j = 0; j < n; ++j) {
                    const double d = in[base + j] - mean;
                    var += d * d;
                }
                var /= static_cast<double>(n);
                const double inv = 1.0 / std::sqrt(var + eps);
                // dxhat, and row sums needed for the mean/variance terms
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (std::int64_t j = 0; j < n; ++j) {
                    const double xhat = (in[base + j] - mean) * inv;
                    const double dxhat = g[base + j] * gn[j];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                    dgain[j] += g[base + j] * xhat;
                    dbias[j] += g[base + j];
                }
                for (std::int64_t j = 0; j < n; ++j) {
                    const double xhat = (in[base + j] - mean) * inv;
                    const double dxhat = g[base + j] * gn[j];
                    dx[base + j] = inv * (dxhat - sum_dxhat / static_cast<double>(n) -
                                          xhat * sum_dxhat_xhat / static_cast<double>(n));
                }
            }
            t.accumulate_grad(x, dx);
            t.accumulate_grad(gain, dgain);
            t.accumulate_grad(bias, dbias);
        });
    }

    // ---- activations ----

    ValueId activation(ValueId x, const ActivationSpec& spec) {
        spec.validate();
        if (spec.has_learnable())
            throw std::invalid_argument("learnable activation requires a coefficient node");
        Tensor out = act_forward(spec, value(x));
        return push(std::move(out), {x}, [x, spec](Tape& t, const Tensor& g) {
            t.accumulate_grad(x, eegdec::hadamard(g, act_grad_input(spec, t.value(x))));
        });
    }

    // Learnable kinds: coefficients come from a tape node so they receive
    // gradient like any other parameter.
    ValueId activation(ValueId x, const ActivationSpec& spec_template, ValueId coeffs) {
        ActivationSpec spec = spec_template;
        spec.params = value(coeffs).values();
        spec.validate();
        if (!spec.has_learnable())
            throw std::invalid_argument("coefficient node given for a fixed activation kind");
        Tensor out = act_forward(spec, value(x));
        return push(std::move(out), {x, coeffs}, [x, coeffs, spec](Tape& t, const Tensor& g) {
            ActivationSpec live = spec;
            live.params = t.value(coeffs).values();
            const Tensor& in = t.value(x);
            t.accumulate_grad(x, eegdec::hadamard(g, act_grad_input(live, in)));
            Tensor dc({live.param_count()});
            std::vector<double> buf(static_cast<std::size_t>(live.param_count()));
            for (std::int64_t i = 0; i < in.size(); ++i) {
                act_param_derivatives(live, in[i], buf.data());
                for (std::int64_t j = 0; j < dc.size(); ++j)
                    dc[j] += g[i] * buf[static_cast<std::size_t>(j)];
            }
            t.accumulate_grad(coeffs, dc);
        });
    }

    // ---- loss ----

    // Sum of negative log-likelihoods over non-pad targets. Pairs with a
    // 1/count scale to form the mean loss, so padded positions can never
    // shift the result.
    ValueId cross_entropy_sum(ValueId logits, std::vector<std::int64_t> targets, std::int64_t pad_id,
                              std::int64_t* n_valid_out = nullptr) {
        const Tensor& lg = value(logits);
        if (lg.ndim() != 2 || static_cast<std::int64_t>(targets.size()) != lg.rows())
            throw ShapeError("cross_entropy_sum: " + std::to_string(targets.size()) +
                             " targets vs logits " + shape_str(lg.shape()));
        double total = 0.0;
        std::int64_t n_valid = 0;
        for (std::int64_t r = 0; r < lg.rows(); ++r) {
            const std::int64_t tgt = targets[static_cast<std::size_t>(r)];
            if (tgt == pad_id) continue;
            if (tgt < 0 || tgt >= lg.cols())
                throw std::out_of_range("cross_entropy_sum: target " + std::to_string(tgt) +
                                        " outside vocab " + std::to_string(lg.cols()));
            ++n_valid;
            double mx = lg.at(r, 0);
            for (std::int64_t j = 1; j < lg.cols(); ++j) mx = std::max(mx, lg.at(r, j));
            double lse = 0.0;
            for (std::int64_t j = 0; j < lg.cols(); ++j) lse += std::exp(lg.at(r, j) - mx);
            total += mx + std::log(lse) - lg.at(r, tgt);
        }
        if (n_valid_out) *n_valid_out = n_valid;
        return push(Tensor::scalar(total), {logits},
                    [logits, targets = std::move(targets), pad_id](Tape& t, const Tensor& g) {
                        const Tensor& lg2 = t.value(logits);
                        Tensor dl = Tensor::zeros_like(lg2);
                        for (std::int64_t r = 0; r < lg2.rows(); ++r) {
                            const std::int64_t tgt = targets[static_cast<std::size_t>(r)];
                            if (tgt == pad_id) continue;
                            double mx = lg2.at(r, 0);
                            for (std::int64_t j = 1; j < lg2.cols(); ++j)
                                mx = std::max(mx, lg2.at(r, j));
                            double denom = 0.0;
                            for (std::int64_t j = 0; j < lg2.cols(); ++j)
                                denom += std::exp(lg2.at(r, j) - mx);
                            for (std::int64_t j = 0; j < lg2.cols(); ++j) {
                                double p = std::exp(lg2.at(r, j) - mx) / denom;
                                dl.at(r, j) = g[0] * (p - (j == tgt ? 1.0 : 0.0));
                            }
                        }
                        t.accumulate_grad(logits, dl);
                    });
    }

    // ---- backward ----

    GradMap backward(ValueId loss) {
        const Tensor& lv = value(loss);
        if (!lv.is_scalar())
            throw std::invalid_argument("backward: loss must be scalar, got " +
                                        shape_str(lv.shape()));
        grads_.assign(nodes_.size(), Tensor());
        grads_[static_cast<std::size_t>(loss)] = Tensor::scalar(1.0);
        for (std::int64_t i = loss; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (grads_[static_cast<std::size_t>(i)].size() == 0) continue;
            if (n.backprop) n.backprop(*this, grads_[static_cast<std::size_t>(i)]);
        }
        GradMap out;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const Node& n = nodes_[i];
            if (n.param_name.empty() || n.frozen) continue;
            if (grads_[i].size() == 0) continue;
            out.emplace(n.param_name, grads_[i]);
        }
        return out;
    }

    // Gradient of a non-parameter node from the last backward call (tests).
    const Tensor& grad_of(ValueId id) const {
        if (grads_.empty() || grads_[static_cast<std::size_t>(id)].size() == 0)
            throw std::logic_error("grad_of: no gradient recorded for node");
        return grads_[static_cast<std::size_t>(id)];
    }

private:
    struct Node {
        Tensor value;
        std::vector<ValueId> parents;
        std::function<void(Tape&, const Tensor&)> backprop;
        std::string param_name;
        bool frozen = false;
    };

    ValueId push(Tensor value, std::vector<ValueId> parents,
                 std::function<void(Tape&, const Tensor&)> backprop) {
        nodes_.push_back(Node{std::move(value), std::move(parents), std::move(backprop), {}, false});
        return static_cast<ValueId>(nodes_.size() - 1);
    }

    void accumulate_grad(ValueId id, const Tensor& delta) {
        Tensor& g = grads_[static_cast<std::size_t>(id)];
        if (g.size() == 0)
            g = delta;
        else
            accumulate(g, delta);
    }

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

}  // namespace eegdec
