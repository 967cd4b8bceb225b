#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace spedit::nn {

using Mat = Eigen::MatrixXd;

// A named trainable matrix with its accumulated gradient and Adam state.
struct Parameter {
    std::string name;
    Mat value;
    Mat grad;
    Mat adam_m, adam_v;

    Parameter() = default;
    Parameter(std::string n, Mat v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(Mat::Zero(value.rows(), value.cols())),
          adam_m(Mat::Zero(value.rows(), value.cols())),
          adam_v(Mat::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(); }
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    uint64_t order = 0;                     // creation index, defines topology
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backprop;    // adds this node's grad into parents
    Parameter* param = nullptr;             // set for leaf parameter nodes
};

// Value wrapper used to compose graphs.
struct Tensor {
    NodePtr node;

    const Mat& value() const { return node->value; }
    Eigen::Index rows() const { return node->value.rows(); }
    Eigen::Index cols() const { return node->value.cols(); }
};

Tensor constant(Mat v);
Tensor leaf(Parameter& p);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor add(const Tensor& a, const Tensor& b);           // same shape
Tensor add_rowvec(const Tensor& a, const Tensor& row);  // row is 1 x C
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
Tensor tanh_t(const Tensor& a);
// Per-row layer normalization with 1 x C gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// Row-wise softmax where entry (t, s) is masked out when s > t.
Tensor causal_softmax(const Tensor& scores);
Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index n);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
// Embedding lookup: rows of `table` selected by ids; backward scatter-adds.
Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);
// im2col for 1-D convolution along rows with zero padding ("same" length):
// output row t = concatenation of rows t - K/2 .. t + K/2 of the input.
Tensor unfold_rows(const Tensor& a, int kernel);

// Mean over masked positions of -log softmax(logits[t])[target[t]], divided
// by `extra_norm` (1 for a plain mean over the mask).
Tensor masked_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                            const std::vector<char>& mask, double normalizer);
// mean |a - b| over all entries.
Tensor l1_loss(const Tensor& a, const Mat& target);
// mean of all entries (for composing scalar objectives).
Tensor mean_all(const Tensor& a);

// Log-softmax of a single row vector (forward only; used by decoding).
Eigen::RowVectorXd log_softmax_row(const Eigen::RowVectorXd& logits);

// Reverse-mode sweep from a scalar node; accumulates into Parameter::grad.
void backward(const Tensor& loss);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int warmup_steps = 0;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    // Current learning rate after linear warmup.
    double lr_at(int step) const;
    void step(std::vector<Parameter*>& params);
    int steps_taken() const { return t_; }
    void set_steps(int t) { t_ = t; }

private:
    AdamConfig cfg_;
    int t_ = 0;
};

// Gaussian init helper (mt19937_64 + normal_distribution, deterministic per
// platform given the seed).
Mat randn(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng);

}  // namespace spedit::nn
