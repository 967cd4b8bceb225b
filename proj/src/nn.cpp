#include "spedit/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "spedit/errors.hpp"

namespace spedit::nn {

namespace {

std::atomic<uint64_t> g_order{0};

NodePtr make_node(Mat value, std::vector<NodePtr> parents, bool needs_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->needs_grad = needs_grad;
    n->order = g_order.fetch_add(1);
    return n;
}

bool any_grad(const std::vector<NodePtr>& parents) {
    for (const auto& p : parents)
        if (p->needs_grad) return true;
    return false;
}

}  // namespace

Tensor constant(Mat v) { return {make_node(std::move(v), {}, false)}; }

Tensor leaf(Parameter& p) {
    auto n = make_node(p.value, {}, true);
    n->param = &p;
    return {n};
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) throw ShapeError("matmul dimension mismatch");
    auto n = make_node(a.value() * b.value(), {a.node, b.node}, any_grad({a.node, b.node}));
    n->backprop = [](Node& self) {
        auto& a = *self.parents[0];
        auto& b = *self.parents[1];
        if (a.needs_grad) a.grad.noalias() += self.grad * b.value.transpose();
        if (b.needs_grad) b.grad.noalias() += a.value.transpose() * self.grad;
    };
    return {n};
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) throw ShapeError("matmul_nt dimension mismatch");
    auto n = make_node(a.value() * b.value().transpose(), {a.node, b.node},
                       any_grad({a.node, b.node}));
    n->backprop = [](Node& self) {
        auto& a = *self.parents[0];
        auto& b = *self.parents[1];
        if (a.needs_grad) a.grad.noalias() += self.grad * b.value;
        if (b.needs_grad) b.grad.noalias() += self.grad.transpose() * a.value;
    };
    return {n};
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("add shape mismatch");
    auto n = make_node(a.value() + b.value(), {a.node, b.node}, any_grad({a.node, b.node}));
    n->backprop = [](Node& self) {
        for (auto& p : self.parents)
            if (p->needs_grad) p->grad += self.grad;
    };
    return {n};
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_rowvec shape mismatch");
    Mat v = a.value();
    v.rowwise() += Eigen::RowVectorXd(row.value());
    auto n = make_node(std::move(v), {a.node, row.node}, any_grad({a.node, row.node}));
    n->backprop = [](Node& self) {
        auto& a = *self.parents[0];
        auto& r = *self.parents[1];
        if (a.needs_grad) a.grad += self.grad;
        if (r.needs_grad) r.grad += self.grad.colwise().sum();
    };
    return {n};
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor scale(const Tensor& a, double s) {
    auto n = make_node(a.value() * s, {a.node}, a.node->needs_grad);
    n->backprop = [s](Node& self) {
        if (self.parents[0]->needs_grad) self.parents[0]->grad += self.grad * s;
    };
    return {n};
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("hadamard shape mismatch");
    auto n = make_node(a.value().cwiseProduct(b.value()), {a.node, b.node},
                       any_grad({a.node, b.node}));
    n->backprop = [](Node& self) {
        auto& a = *self.parents[0];
        auto& b = *self.parents[1];
        if (a.needs_grad) a.grad += self.grad.cwiseProduct(b.value);
        if (b.needs_grad) b.grad += self.grad.cwiseProduct(a.value);
    };
    return {n};
}

Tensor relu(const Tensor& a) {
    auto n = make_node(a.value().cwiseMax(0.0), {a.node}, a.node->needs_grad);
    n->backprop = [](Node& self) {
        auto& a = *self.parents[0];
        if (a.needs_grad)
            a.grad += self.grad.cwiseProduct(
                (a.value.array() > 0.0).cast<double>().matrix());
    };
    return {n};
}

Tensor tanh_t(const Tensor& a) {
    auto n = make_node(a.value().array().tanh().matrix(), {a.node}, a.node->needs_grad);
    n->backprop = [](Node& self) {
        auto& a = *self.parents[0];
        if (a.needs_grad)
            a.grad += self.grad.cwiseProduct(
                (1.0 - self.value.array().square()).matrix());
    };
    return {n};
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const Mat& v = x.value();
    const Eigen::Index T = v.rows(), C = v.cols();
    if (gain.rows() != 1 || gain.cols() != C || bias.rows() != 1 || bias.cols() != C)
        throw ShapeError("layer_norm gain/bias must be 1 x C");

    Eigen::VectorXd mean = v.rowwise().mean();
    Mat centered = v.colwise() - mean;
    Eigen::VectorXd var = centered.array().square().matrix().rowwise().mean();
    Eigen::VectorXd inv_std = (var.array() + eps).rsqrt();
    Mat norm = centered.array().colwise() * inv_std.array();

    Mat out = norm;
    out.array().rowwise() *= gain.value().row(0).array();
    out.rowwise() += Eigen::RowVectorXd(bias.value());

    auto n = make_node(std::move(out), {x.node, gain.node, bias.node},
                       any_grad({x.node, gain.node, bias.node}));
    // Captured intermediates for the backward pass.
    n->backprop = [norm, inv_std, C](Node& self) {
        auto& xp = *self.parents[0];
        auto& gp = *self.parents[1];
        auto& bp = *self.parents[2];
        const Eigen::RowVectorXd g = gp.value.row(0);
        if (bp.needs_grad) bp.grad += self.grad.colwise().sum();
        if (gp.needs_grad) gp.grad += self.grad.cwiseProduct(norm).colwise().sum();
        if (xp.needs_grad) {
            // d/dx of per-row normalization: (dn - mean(dn) - n * mean(dn .* n)) * inv_std
            Mat dn = self.grad;
            dn.array().rowwise() *= g.array();
            Eigen::VectorXd mean_dn = dn.rowwise().mean();
            Eigen::VectorXd mean_dn_n = dn.cwiseProduct(norm).rowwise().mean();
            Mat dx = dn;
            dx.colwise() -= mean_dn;
            dx -= (norm.array().colwise() * mean_dn_n.array()).matrix();
            dx.array().colwise() *= inv_std.array();
            xp.grad += dx;
        }
    };
    return {n};
}

Tensor causal_softmax(const Tensor& scores) {
    const Mat& s = scores.value();
    if (s.rows() != s.cols()) throw ShapeError("causal_softmax expects a square matrix");
    const Eigen::Index T = s.rows();
    Mat out = Mat::Zero(T, T);
    for (Eigen::Index t = 0; t < T; ++t) {
        double mx = s.row(t).head(t + 1).maxCoeff();
        double sum = 0.0;
        for (Eigen::Index k = 0; k <= t; ++k) {
            out(t, k) = std::exp(s(t, k) - mx);
            sum += out(t, k);
        }
        out.row(t).head(t + 1) /= sum;
    }
    auto n = make_node(std::move(out), {scores.node}, scores.node->needs_grad);
    n->backprop = [](Node& self) {
        auto& p = *self.parents[0];
        if (!p.needs_grad) return;
        const Eigen::Index T = self.value.rows();
        for (Eigen::Index t = 0; t < T; ++t) {
            auto y = self.value.row(t).head(t + 1);
            auto dy = self.grad.row(t).head(t + 1);
            double dot = y.dot(dy);
            p.grad.row(t).head(t + 1) += (dy.array() - dot).matrix().cwiseProduct(y);
        }
    };
    return {n};
}

Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index n_cols) {
    if (start < 0 || start + n_cols > a.cols()) throw ShapeError("slice_cols out of range");
    auto n = make_node(a.value().middleCols(start, n_cols), {a.node}, a.node->needs_grad);
    n->backprop = [start, n_cols](Node& self) {
        auto& p = *self.parents[0];
        if (p.needs_grad) p.grad.middleCols(start, n_cols) += self.grad;
    };
    return {n};
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    Eigen::Index rows = parts.front().rows(), total = 0;
    std::vector<NodePtr> parents;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw ShapeError("concat_cols row mismatch");
        total += p.cols();
        parents.push_back(p.node);
    }
    Mat v(rows, total);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        v.middleCols(off, p.cols()) = p.value();
        off += p.cols();
    }
    auto n = make_node(std::move(v), parents, any_grad(parents));
    n->backprop = [](Node& self) {
        Eigen::Index off = 0;
        for (auto& p : self.parents) {
            if (p->needs_grad) p->grad += self.grad.middleCols(off, p->value.cols());
            off += p->value.cols();
        }
    };
    return {n};
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    Eigen::Index cols = parts.front().cols(), total = 0;
    std::vector<NodePtr> parents;
    for (const auto& p : parts) {
        if (p.cols() != cols) throw ShapeError("concat_rows col mismatch");
        total += p.rows();
        parents.push_back(p.node);
    }
    Mat v(total, cols);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        v.middleRows(off, p.rows()) = p.value();
        off += p.rows();
    }
    auto n = make_node(std::move(v), parents, any_grad(parents));
    n->backprop = [](Node& self) {
        Eigen::Index off = 0;
        for (auto& p : self.parents) {
            if (p->needs_grad) p->grad += self.grad.middleRows(off, p->value.rows());
            off += p->value.rows();
        }
    };
    return {n};
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
    Mat v(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table.rows()) throw RangeError("gather id out of range");
        v.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
    }
    auto n = make_node(std::move(v), {table.node}, table.node->needs_grad);
    n->backprop = [ids](Node& self) {
        auto& t = *self.parents[0];
        if (!t.needs_grad) return;
        for (std::size_t i = 0; i < ids.size(); ++i)
            t.grad.row(ids[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    };
    return {n};
}

Tensor unfold_rows(const Tensor& a, int kernel) {
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("unfold kernel must be odd");
    const Mat& v = a.value();
    const Eigen::Index T = v.rows(), C = v.cols();
    const int half = kernel / 2;
    Mat out = Mat::Zero(T, C * kernel);
    for (Eigen::Index t = 0; t < T; ++t)
        for (int k = 0; k < kernel; ++k) {
            Eigen::Index src = t + k - half;
            if (src >= 0 && src < T) out.block(t, k * C, 1, C) = v.row(src);
        }
    auto n = make_node(std::move(out), {a.node}, a.node->needs_grad);
    n->backprop = [kernel, half, C](Node& self) {
        auto& p = *self.parents[0];
        if (!p.needs_grad) return;
        const Eigen::Index T = p.value.rows();
        for (Eigen::Index t = 0; t < T; ++t)
            for (int k = 0; k < kernel; ++k) {
                Eigen::Index src = t + k - half;
                if (src >= 0 && src < T)
                    p.grad.row(src) += self.grad.block(t, k * C, 1, C);
            }
    };
    return {n};
}

Tensor masked_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                            const std::vector<char>& mask, double normalizer) {
    const Mat& z = logits.value();
    if (targets.size() != mask.size() || static_cast<Eigen::Index>(targets.size()) != z.rows())
        throw ShapeError("cross entropy targets/mask/logits disagree");
    if (normalizer <= 0) throw ConfigError("normalizer must be positive");

    double loss = 0.0;
    Mat soft(z.rows(), z.cols());
    for (Eigen::Index t = 0; t < z.rows(); ++t) {
        if (!mask[t]) continue;
        Eigen::RowVectorXd ls = log_softmax_row(z.row(t));
        soft.row(t) = ls.array().exp().matrix();
        loss -= ls(targets[t]);
    }
    Mat out(1, 1);
    out(0, 0) = loss / normalizer;
    auto n = make_node(std::move(out), {logits.node}, logits.node->needs_grad);
    n->backprop = [targets, mask, normalizer, soft](Node& self) {
        auto& p = *self.parents[0];
        if (!p.needs_grad) return;
        double g = self.grad(0, 0) / normalizer;
        for (Eigen::Index t = 0; t < p.value.rows(); ++t) {
            if (!mask[t]) continue;
            p.grad.row(t) += g * soft.row(t);
            p.grad(t, targets[t]) -= g;
        }
    };
    return {n};
}

Tensor l1_loss(const Tensor& a, const Mat& target) {
    if (a.rows() != target.rows() || a.cols() != target.cols())
        throw ShapeError("l1_loss shape mismatch");
    Mat diff = a.value() - target;
    Mat out(1, 1);
    out(0, 0) = diff.array().abs().mean();
    auto n = make_node(std::move(out), {a.node}, a.node->needs_grad);
    n->backprop = [diff](Node& self) {
        auto& p = *self.parents[0];
        if (!p.needs_grad) return;
        double g = self.grad(0, 0) / static_cast<double>(diff.size());
        p.grad += g * diff.array().sign().matrix();
    };
    return {n};
}

Tensor mean_all(const Tensor& a) {
    Mat out(1, 1);
    out(0, 0) = a.value().mean();
    auto n = make_node(std::move(out), {a.node}, a.node->needs_grad);
    n->backprop = [](Node& self) {
        auto& p = *self.parents[0];
        if (p.needs_grad)
            p.grad.array() += self.grad(0, 0) / static_cast<double>(p.value.size());
    };
    return {n};
}

Eigen::RowVectorXd log_softmax_row(const Eigen::RowVectorXd& logits) {
    double mx = logits.maxCoeff();
    Eigen::ArrayXd shifted = logits.transpose().array() - mx;
    double lse = std::log(shifted.exp().sum());
    return (shifted - lse).matrix().transpose();
}

void backward(const Tensor& loss) {
    if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError("backward expects a scalar node");

    // Collect the reachable subgraph and sweep in reverse creation order.
    std::vector<NodePtr> nodes;
    std::unordered_set<Node*> seen;
    std::vector<NodePtr> stack{loss.node};
    while (!stack.empty()) {
        NodePtr n = stack.back();
        stack.pop_back();
        if (!seen.insert(n.get()).second) continue;
        nodes.push_back(n);
        for (auto& p : n->parents) stack.push_back(p);
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const NodePtr& a, const NodePtr& b) { return a->order > b->order; });

    for (auto& n : nodes) n->grad = Mat::Zero(n->value.rows(), n->value.cols());
    loss.node->grad(0, 0) = 1.0;
    for (auto& n : nodes) {
        if (n->param && n->needs_grad) n->param->grad += n->grad;
        if (n->backprop && n->needs_grad) n->backprop(*n);
    }
}

double Adam::lr_at(int step) const {
    if (cfg_.warmup_steps > 0 && step < cfg_.warmup_steps)
        return cfg_.lr * (step + 1) / static_cast<double>(cfg_.warmup_steps);
    return cfg_.lr;
}

void Adam::step(std::vector<Parameter*>& params) {
    ++t_;
    double lr = lr_at(t_ - 1);
    double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (Parameter* p : params) {
        p->adam_m = cfg_.beta1 * p->adam_m + (1.0 - cfg_.beta1) * p->grad;
        p->adam_v = cfg_.beta2 * p->adam_v.array() + (1.0 - cfg_.beta2) * p->grad.array().square();
        p->value.array() -=
            lr * (p->adam_m.array() / bc1) /
            ((p->adam_v.array() / bc2).sqrt() + cfg_.eps);
    }
}

Mat randn(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
    return m;
}

}  // namespace spedit::nn
