#include "idcanvas/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "idcanvas/errors.hpp"

namespace idcanvas::ad {

namespace {

Var make(Tensor value, std::vector<std::shared_ptr<Node>> parents,
         std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    bool needs = false;
    for (const auto& p : parents) needs = needs || p->requires_grad;
    if (needs) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return Var(std::move(node));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Tensor& Node::grad_buffer() {
    if (grad.size() != value.size()) grad = Tensor(value.shape());
    return grad;
}

void Node::accumulate(const Tensor& g) {
    Tensor& buf = grad_buffer();
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

double Var::item() const {
    require(value().size() == 1, "item() on non-scalar " + shape_str(shape()));
    return value()[0];
}

void Var::zero_grad() const {
    if (node_) node_->grad = Tensor();
}

Var constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return Var(std::move(node));
}

Var variable(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    return Var(std::move(node));
}

void backward(const Var& root) {
    require(root.value().size() == 1, "backward() needs a scalar root");
    if (!root.requires_grad()) return;

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{&root.node(), 0}};
    seen.insert(&root.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.push_back({parent, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node().grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad.size() == n->value.size()) n->backward_fn(*n);
    }
}

// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    return make(std::move(out), {a.ptr(), b.ptr()}, [](Node& self) {
        for (auto& p : self.parents)
            if (p->requires_grad) p->accumulate(self.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    return make(std::move(out), {a.ptr(), b.ptr()}, [](Node& self) {
        if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
        if (self.parents[1]->requires_grad) {
            Tensor& g = self.parents[1]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    return make(std::move(out), {a.ptr(), b.ptr()}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            Tensor& g = pa.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            Tensor& g = pb.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a.value();
    for (double& v : out.data()) v *= s;
    return make(std::move(out), {a.ptr()}, [s](Node& self) {
        Tensor& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out = a.value();
    for (double& v : out.data()) v += s;
    return make(std::move(out), {a.ptr()},
                [](Node& self) { self.parents[0]->accumulate(self.grad); });
}

Var add_row(const Var& a, const Var& row) {
    const std::size_t m = a.rows(), n = a.cols();
    require(row.value().size() == n, "add_row: row length " +
                                         std::to_string(row.value().size()) + " vs " +
                                         std::to_string(n) + " columns");
    Tensor out = a.value();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += row.value()[j];
    return make(std::move(out), {a.ptr(), row.ptr()}, [m, n](Node& self) {
        if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
        if (self.parents[1]->requires_grad) {
            Tensor& g = self.parents[1]->grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
        }
    });
}

// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
Var gelu(const Var& a) {
    Tensor out = a.value();
    for (double& v : out.data()) {
        const double x = v;
        v = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
    }
    return make(std::move(out), {a.ptr()}, [](Node& self) {
        Node& p = *self.parents[0];
        Tensor& g = p.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = p.value[i];
            const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
            const double d = 0.5 * (1.0 + th) +
                             0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
            g[i] += self.grad[i] * d;
        }
    });
}

Var matmul(const Var& a, const Var& b) {
    Tensor out = idcanvas::matmul(a.value(), b.value());
    return make(std::move(out), {a.ptr(), b.ptr()}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const std::size_t m = pa.value.rows(), k = pa.value.cols(), n = pb.value.cols();
        const double* go = self.grad.data().data();
        if (pa.requires_grad) {
            // dA = dO B^T
            double* ga = pa.grad_buffer().data().data();
            const double* bv = pb.value.data().data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    const double* brow = bv + p * n;
                    const double* grow = go + i * n;
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    ga[i * k + p] += acc;
                }
        }
        if (pb.requires_grad) {
            // dB = A^T dO
            double* gb = pb.grad_buffer().data().data();
            const double* av = pa.value.data().data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = av[i * k + p];
                    if (aip == 0.0) continue;
                    const double* grow = go + i * n;
                    double* gbrow = gb + p * n;
                    for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                }
        }
    });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
    return add_row(matmul(x, weight), bias);
}

Var layer_norm(const Var& a, double eps) {
    const std::size_t m = a.rows(), n = a.cols();
    require(n >= 2, "layer_norm needs at least 2 features per row");
    Tensor out(a.shape());
    auto inv_std = std::make_shared<std::vector<double>>(m);
    for (std::size_t i = 0; i < m; ++i) {
        auto row = a.value().row(i);
        double mu = 0.0;
        for (double v : row) mu += v;
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (double v : row) var += (v - mu) * (v - mu);
        var /= static_cast<double>(n);
        const double r = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = r;
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = (row[j] - mu) * r;
    }
    return make(std::move(out), {a.ptr()}, [m, n, inv_std](Node& self) {
        Tensor& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
            double mean_g = 0.0, mean_gy = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                mean_g += self.grad[i * n + j];
                mean_gy += self.grad[i * n + j] * self.value[i * n + j];
            }
            mean_g /= static_cast<double>(n);
            mean_gy /= static_cast<double>(n);
            const double r = (*inv_std)[i];
            for (std::size_t j = 0; j < n; ++j)
                g[i * n + j] +=
                    r * (self.grad[i * n + j] - mean_g - self.value[i * n + j] * mean_gy);
        }
    });
}

Var reshape(const Var& a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    return make(std::move(out), {a.ptr()},
                [](Node& self) { self.parents[0]->accumulate(self.grad); });
}

Var gather_rows(const Var& a, std::span<const std::size_t> rows) {
    const std::size_t n = a.cols();
    const std::size_t src_rows = a.rows();
    Tensor out({rows.size(), n});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] < src_rows, "gather_rows: row index out of range");
        std::copy_n(a.value().data().data() + rows[i] * n, n, out.data().data() + i * n);
    }
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    return make(std::move(out), {a.ptr()}, [idx = std::move(idx), n](Node& self) {
        Tensor& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < n; ++j) g[idx[i] * n + j] += self.grad[i * n + j];
    });
}

Var gather(const Var& a, std::vector<std::size_t> index, Shape out_shape) {
    require(shape_numel(out_shape) == index.size(), "gather: index count vs output shape");
    Tensor out(std::move(out_shape));
    for (std::size_t i = 0; i < index.size(); ++i) {
        require(index[i] < a.value().size(), "gather: index out of range");
        out[i] = a.value()[index[i]];
    }
    return make(std::move(out), {a.ptr()}, [index = std::move(index)](Node& self) {
        Tensor& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < index.size(); ++i) g[index[i]] += self.grad[i];
    });
}

Var concat_rows(std::span<const Var> parts) {
    require(!parts.empty(), "concat_rows of nothing");
    std::size_t n = parts.front().cols();
    for (const auto& p : parts)
        if (p.value().size() != 0) {
            n = p.cols();
            break;
        }
    std::size_t total = 0;
    std::vector<std::shared_ptr<Node>> parents;
    for (const auto& p : parts) {
        if (p.value().size() == 0) continue;
        require(p.cols() == n, "concat_rows: width mismatch " + std::to_string(p.cols()) +
                                   " vs " + std::to_string(n));
        total += p.rows();
    }
    Tensor out({total, n});
    std::size_t offset = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        if (p.value().size() == 0) continue;
        std::copy(p.value().data().begin(), p.value().data().end(),
                  out.data().begin() + static_cast<std::ptrdiff_t>(offset * n));
        offsets.push_back(offset);
        parents.push_back(p.ptr());
        offset += p.rows();
    }
    return make(std::move(out), std::move(parents), [offsets, n](Node& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            Node& p = *self.parents[k];
            if (!p.requires_grad) continue;
            Tensor& g = p.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offsets[k] * n + i];
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    require(!parts.empty(), "concat_cols of nothing");
    const std::size_t m = parts.front().rows();
    std::size_t total = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::vector<std::size_t> offsets, widths;
    for (const auto& p : parts) {
        require(p.rows() == m, "concat_cols: row count mismatch");
        offsets.push_back(total);
        widths.push_back(p.cols());
        total += p.cols();
        parents.push_back(p.ptr());
    }
    Tensor out({m, total});
    for (std::size_t k = 0; k < parts.size(); ++k)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j)
                out[i * total + offsets[k] + j] = parts[k].value()[i * widths[k] + j];
    return make(std::move(out), std::move(parents), [offsets, widths, m, total](Node& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            Node& p = *self.parents[k];
            if (!p.requires_grad) continue;
            Tensor& g = p.grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < widths[k]; ++j)
                    g[i * widths[k] + j] += self.grad[i * total + offsets[k] + j];
        }
    });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
    require(begin <= end && end <= a.rows(), "slice_rows out of range");
    const std::size_t n = a.cols();
    Tensor out({end - begin, n});
    std::copy_n(a.value().data().data() + begin * n, (end - begin) * n, out.data().data());
    return make(std::move(out), {a.ptr()}, [begin, n](Node& self) {
        Tensor& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * n + i] += self.grad[i];
    });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
    require(begin <= end && end <= a.cols(), "slice_cols out of range");
    const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
    Tensor out({m, w});
    for (std::size_t i = 0; i < m; ++i)
        std::copy_n(a.value().data().data() + i * n + begin, w, out.data().data() + i * w);
    return make(std::move(out), {a.ptr()}, [m, n, w, begin](Node& self) {
        Tensor& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += self.grad[i * w + j];
    });
}

Var mean_rows(const Var& a) {
    const std::size_t m = a.rows(), n = a.cols();
    require(m > 0, "mean_rows of an empty tensor");
    Tensor out({1, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += a.value()[i * n + j];
    for (double& v : out.data()) v /= static_cast<double>(m);
    return make(std::move(out), {a.ptr()}, [m, n](Node& self) {
        Tensor& g = self.parents[0]->grad_buffer();
        const double inv = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j] * inv;
    });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return make(Tensor({1}, {s}), {a.ptr()}, [](Node& self) {
        Tensor& g = self.parents[0]->grad_buffer();
        for (double& v : g.data()) v += self.grad[0];
    });
}

Var mean(const Var& a) {
    require(a.value().size() > 0, "mean of an empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var mse(const Var& pred, const Var& target) {
    require_same_shape(pred, target, "mse");
    const std::size_t n = pred.value().size();
    require(n > 0, "mse of empty tensors");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred.value()[i] - target.value()[i];
        s += d * d;
    }
    return make(Tensor({1}, {s / static_cast<double>(n)}), {pred.ptr(), target.ptr()},
                [n](Node& self) {
                    Node& p = *self.parents[0];
                    Node& t = *self.parents[1];
                    const double c = 2.0 * self.grad[0] / static_cast<double>(n);
                    if (p.requires_grad) {
                        Tensor& g = p.grad_buffer();
                        for (std::size_t i = 0; i < n; ++i) g[i] += c * (p.value[i] - t.value[i]);
                    }
                    if (t.requires_grad) {
                        Tensor& g = t.grad_buffer();
                        for (std::size_t i = 0; i < n; ++i) g[i] -= c * (p.value[i] - t.value[i]);
                    }
                });
}

Var l2_normalize(const Var& a, double eps) {
    double ss = 0.0;
    for (double v : a.value().data()) ss += v * v;
    const double norm = std::sqrt(ss + eps * eps);
    Tensor out = a.value();
    for (double& v : out.data()) v /= norm;
    return make(std::move(out), {a.ptr()}, [norm](Node& self) {
        double dot = 0.0;
        for (std::size_t i = 0; i < self.grad.size(); ++i) dot += self.grad[i] * self.value[i];
        Tensor& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += (self.grad[i] - self.value[i] * dot) / norm;
    });
}

Var cosine(const Var& a, const Var& b, double eps) {
    require(a.value().size() == b.value().size(), "cosine: length mismatch");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.value().size(); ++i) {
        ab += a.value()[i] * b.value()[i];
        aa += a.value()[i] * a.value()[i];
        bb += b.value()[i] * b.value()[i];
    }
    const double na = std::sqrt(aa + eps * eps);
    const double nb = std::sqrt(bb + eps * eps);
    const double c = ab / (na * nb);
    return make(Tensor({1}, {c}), {a.ptr(), b.ptr()}, [na, nb, c](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const double g0 = self.grad[0];
        if (pa.requires_grad) {
            Tensor& g = pa.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += g0 * (pb.value[i] / (na * nb) - c * pa.value[i] / (na * na));
        }
        if (pb.requires_grad) {
            Tensor& g = pb.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += g0 * (pa.value[i] / (na * nb) - c * pb.value[i] / (nb * nb));
        }
    });
}

Var masked_softmax_attention(const Var& q, const Var& k, const Var& v, const AttentionMask& mask) {
    const std::size_t nq = q.rows(), dh = q.cols(), nk = k.rows(), dv = v.cols();
    require(k.cols() == dh, "attention: q/k width mismatch");
    require(v.rows() == nk, "attention: k/v length mismatch");
    require(mask.size() == nq && nq == nk, "attention: mask must be square over the sequence");
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    auto probs = std::make_shared<Tensor>(Shape{nq, nk});
    Tensor out({nq, dv});
    const double* qv = q.value().data().data();
    const double* kv = k.value().data().data();
    const double* vv = v.value().data().data();
    for (std::size_t i = 0; i < nq; ++i) {
        const std::uint8_t* allowed = mask.row(i);
        double* prow = probs->data().data() + i * nk;
        double mx = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t j = 0; j < nk; ++j) {
            if (!allowed[j]) continue;
            any = true;
            double s = 0.0;
            for (std::size_t c = 0; c < dh; ++c) s += qv[i * dh + c] * kv[j * dh + c];
            s *= inv_sqrt;
            prow[j] = s;
            mx = std::max(mx, s);
        }
        if (!any)
            throw ContractViolation("attention: query row " + std::to_string(i) +
                                    " has no allowed key");
        double z = 0.0;
        for (std::size_t j = 0; j < nk; ++j) {
            if (!allowed[j]) continue;
            prow[j] = std::exp(prow[j] - mx);
            z += prow[j];
        }
        double* orow = out.data().data() + i * dv;
        for (std::size_t j = 0; j < nk; ++j) {
            if (!allowed[j]) continue;
            prow[j] /= z;
            const double p = prow[j];
            for (std::size_t c = 0; c < dv; ++c) orow[c] += p * vv[j * dv + c];
        }
    }

    return make(std::move(out), {q.ptr(), k.ptr(), v.ptr()},
                [probs, nq, nk, dh, dv, inv_sqrt](Node& self) {
                    Node& pq = *self.parents[0];
                    Node& pk = *self.parents[1];
                    Node& pv = *self.parents[2];
                    const double* P = probs->data().data();
                    const double* go = self.grad.data().data();
                    if (pv.requires_grad) {
                        double* gv = pv.grad_buffer().data().data();
                        for (std::size_t i = 0; i < nq; ++i)
                            for (std::size_t j = 0; j < nk; ++j) {
                                const double p = P[i * nk + j];
                                if (p == 0.0) continue;
                                for (std::size_t c = 0; c < dv; ++c)
                                    gv[j * dv + c] += p * go[i * dv + c];
                            }
                    }
                    if (!pq.requires_grad && !pk.requires_grad) return;
                    const double* vv = pv.value.data().data();
                    const double* qv = pq.value.data().data();
                    const double* kv = pk.value.data().data();
                    std::vector<double> ds(nk);
                    double* gq = pq.requires_grad ? pq.grad_buffer().data().data() : nullptr;
                    double* gk = pk.requires_grad ? pk.grad_buffer().data().data() : nullptr;
                    for (std::size_t i = 0; i < nq; ++i) {
                        double rowdot = 0.0;
                        for (std::size_t j = 0; j < nk; ++j) {
                            const double p = P[i * nk + j];
                            if (p == 0.0) {
                                ds[j] = 0.0;
                                continue;
                            }
                            double dp = 0.0;
                            for (std::size_t c = 0; c < dv; ++c) dp += go[i * dv + c] * vv[j * dv + c];
                            ds[j] = dp;
                            rowdot += dp * p;
                        }
                        for (std::size_t j = 0; j < nk; ++j) {
                            const double p = P[i * nk + j];
                            if (p == 0.0) continue;
                            const double s = p * (ds[j] - rowdot) * inv_sqrt;
                            if (gq)
                                for (std::size_t c = 0; c < dh; ++c) gq[i * dh + c] += s * kv[j * dh + c];
                            if (gk)
                                for (std::size_t c = 0; c < dh; ++c) gk[j * dh + c] += s * qv[i * dh + c];
                        }
                    }
                });
}

Var rotate_pairs(const Var& x, std::shared_ptr<const Tensor> cos_table,
                 std::shared_ptr<const Tensor> sin_table) {
    const std::size_t m = x.rows(), n = x.cols();
    require(n % 2 == 0, "rotate_pairs needs an even width");
    require(cos_table->rows() == m && cos_table->cols() == n / 2 &&
                sin_table->shape() == cos_table->shape(),
            "rotate_pairs: angle table shape mismatch");
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n / 2; ++j) {
            const double c = cos_table->at(i, j), s = sin_table->at(i, j);
            const double a = x.value()[i * n + 2 * j], b = x.value()[i * n + 2 * j + 1];
            out[i * n + 2 * j] = c * a - s * b;
            out[i * n + 2 * j + 1] = s * a + c * b;
        }
    return make(std::move(out), {x.ptr()}, [cos_table, sin_table, m, n](Node& self) {
        Tensor& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n / 2; ++j) {
                const double c = cos_table->at(i, j), s = sin_table->at(i, j);
                const double ga = self.grad[i * n + 2 * j], gb = self.grad[i * n + 2 * j + 1];
                g[i * n + 2 * j] += c * ga + s * gb;
                g[i * n + 2 * j + 1] += -s * ga + c * gb;
            }
    });
}

}  // namespace idcanvas::ad
