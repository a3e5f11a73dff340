#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "boss/common.hpp"
#include "boss/rng.hpp"

namespace boss {

// Evaluable velocity field v(x, t) on t in [0, 1]. Output dimension equals
// input dimension; evaluation is deterministic for fixed parameters.
class VelocityField {
public:
    virtual ~VelocityField() = default;
    virtual int dim() const = 0;
    virtual Vec velocity(const Vec& x, double t) const = 0;
};

// ---------------------------------------------------------------------------
// Analytic fields with closed-form solutions, used as test oracles.

class ConstantField : public VelocityField {
public:
    explicit ConstantField(Vec a) : a_(std::move(a)) {}
    int dim() const override { return static_cast<int>(a_.size()); }
    Vec velocity(const Vec&, double) const override { return a_; }
    Vec exact_solution(const Vec& x0, double t) const;

private:
    Vec a_;
};

// v(x, t) = 2t in every coordinate; x(t) = x0 + t^2.
class LinearInTimeField : public VelocityField {
public:
    explicit LinearInTimeField(int d) : d_(d) {}
    int dim() const override { return d_; }
    Vec velocity(const Vec&, double t) const override { return Vec(static_cast<std::size_t>(d_), 2.0 * t); }
    Vec exact_solution(const Vec& x0, double t) const;

private:
    int d_;
};

// 2-D solenoidal field v(x) = omega * (-x1, x0); x(t) = R(omega*t) x0.
class RotationField : public VelocityField {
public:
    explicit RotationField(double omega = 1.0) : omega_(omega) {}
    int dim() const override { return 2; }
    Vec velocity(const Vec& x, double) const override;
    Vec exact_solution(const Vec& x0, double t) const;

private:
    double omega_;
};

// ---------------------------------------------------------------------------
// Trainable MLP velocity network.

enum class Activation { Tanh, Identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Sinusoidal embedding of t: channel 2j is sin(2*pi*2^j*t), channel 2j+1 is
// cos(2*pi*2^j*t).
void time_features(double t, int count, Vec& out);

struct MlpArch {
    int d = 2;
    int time_features = 8;
    std::vector<int> hidden = {64, 64, 64};
    Activation activation = Activation::Tanh;

    // [d + time_features, hidden..., d]
    std::vector<int> layer_sizes() const;
};

// Fully connected velocity network. Parameters live in one flat vector, layer
// by layer: weights row-major (out x in), then biases. Hidden layers apply the
// activation; the output layer is linear.
class MlpVelocity : public VelocityField {
public:
    MlpVelocity(int d, int time_feature_count, std::vector<int> layer_sizes, Activation act);

    static MlpVelocity xavier_init(const MlpArch& arch, Rng& rng);

    int dim() const override { return d_; }
    Vec velocity(const Vec& x, double t) const override;

    int time_feature_count() const { return time_features_; }
    const std::vector<int>& layer_sizes() const { return layer_sizes_; }
    int layer_count() const { return static_cast<int>(layer_sizes_.size()) - 1; }
    int layer_in(int l) const { return layer_sizes_[static_cast<std::size_t>(l)]; }
    int layer_out(int l) const { return layer_sizes_[static_cast<std::size_t>(l) + 1]; }
    Activation activation() const { return activation_; }

    std::size_t parameter_count() const { return params_.size(); }
    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }

    double weight(int l, int row, int col) const { return params_[w_offset_[static_cast<std::size_t>(l)] + static_cast<std::size_t>(row * layer_in(l) + col)]; }
    double& weight(int l, int row, int col) { return params_[w_offset_[static_cast<std::size_t>(l)] + static_cast<std::size_t>(row * layer_in(l) + col)]; }
    double bias(int l, int row) const { return params_[b_offset_[static_cast<std::size_t>(l)] + static_cast<std::size_t>(row)]; }
    double& bias(int l, int row) { return params_[b_offset_[static_cast<std::size_t>(l)] + static_cast<std::size_t>(row)]; }

    std::size_t weight_offset(int l) const { return w_offset_[static_cast<std::size_t>(l)]; }
    std::size_t bias_offset(int l) const { return b_offset_[static_cast<std::size_t>(l)]; }

private:
    friend class LoraAdapter;

    int d_;
    int time_features_;
    std::vector<int> layer_sizes_;
    Activation activation_;
    std::vector<double> params_;
    std::vector<std::size_t> w_offset_;
    std::vector<std::size_t> b_offset_;
};

// ---------------------------------------------------------------------------
// Low-rank adapter: every layer's weight W (m x n) is read as W + A * B^T with
// A (m x r) and B (n x r). Base parameters are never modified while the
// adapter is active; only A and B train.

class LoraAdapter {
public:
    LoraAdapter(const MlpVelocity& base, int rank);

    // A = 0, B small random, so the adapted model starts at the base model.
    static LoraAdapter init(const MlpVelocity& base, int rank, Rng& rng);

    int rank() const { return rank_; }
    int layer_count() const { return static_cast<int>(layer_in_.size()); }
    std::size_t trainable_count() const { return params_.size(); }  // sum of r*(m+n)

    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }

    // A is m x r row-major, B is n x r row-major.
    std::size_t a_offset(int l) const { return a_offset_[static_cast<std::size_t>(l)]; }
    std::size_t b_offset(int l) const { return b_offset_[static_cast<std::size_t>(l)]; }
    int layer_in(int l) const { return layer_in_[static_cast<std::size_t>(l)]; }
    int layer_out(int l) const { return layer_out_[static_cast<std::size_t>(l)]; }

    void check_compatible(const MlpVelocity& model) const;

private:
    int rank_;
    std::vector<int> layer_in_;
    std::vector<int> layer_out_;
    std::vector<double> params_;
    std::vector<std::size_t> a_offset_;
    std::vector<std::size_t> b_offset_;
};

// Base model plus adapter, evaluable as a velocity field.
class AdaptedVelocity : public VelocityField {
public:
    AdaptedVelocity(const MlpVelocity& base, const LoraAdapter& adapter);
    int dim() const override { return base_->dim(); }
    Vec velocity(const Vec& x, double t) const override;

    const MlpVelocity& base() const { return *base_; }
    const LoraAdapter& adapter() const { return *adapter_; }

private:
    const MlpVelocity* base_;
    const LoraAdapter* adapter_;
};

Vec lora_forward(const MlpVelocity& model, const LoraAdapter& adapter, const Vec& x, double t);

// ---------------------------------------------------------------------------
// Weighted squared-residual objective shared by both training losses:
//   loss = sum_i weight_i * |f(x_i, t_i) - target_i|^2

struct ResidualBatch {
    std::vector<Vec> x;
    std::vector<double> t;
    std::vector<Vec> target;
    std::vector<double> weight;

    std::size_t size() const { return x.size(); }
    void add(Vec xi, double ti, Vec yi, double wi);
};

// Returns the loss; grad (resized to the model's parameter count) receives the
// gradient with respect to every weight and bias. Matches central finite
// differences to first order.
double mlp_loss_grad(const MlpVelocity& model, const ResidualBatch& batch, std::vector<double>& grad);

// LoRA variant: gradient with respect to the adapter's A/B parameters only;
// the base stays frozen.
double lora_loss_grad(const MlpVelocity& model, const LoraAdapter& adapter, const ResidualBatch& batch,
                      std::vector<double>& grad);

double mlp_loss(const MlpVelocity& model, const ResidualBatch& batch);

// ---------------------------------------------------------------------------
// Checkpoint file: JSON with {format_version, d, time_features, layer_sizes,
// activation, parameters, optional lora {rank, a, b}}.

struct Checkpoint {
    MlpVelocity model;
    std::optional<LoraAdapter> adapter;
};

void save_checkpoint(const std::filesystem::path& path, const MlpVelocity& model,
                     const LoraAdapter* adapter = nullptr, const std::string& provenance = "");
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace boss
