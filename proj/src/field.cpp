#include "boss/field.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <json.hpp>

namespace boss {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& context) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ParseError(context + ": not a number: '" + std::string(s) + "'");
    }
    return v;
}

Vec ConstantField::exact_solution(const Vec& x0, double t) const {
    Vec x = x0;
    axpy(t, a_, x);
    return x;
}

Vec LinearInTimeField::exact_solution(const Vec& x0, double t) const {
    Vec x = x0;
    for (double& xi : x) xi += t * t;
    return x;
}

Vec RotationField::velocity(const Vec& x, double) const {
    if (x.size() != 2) throw InputError("RotationField expects 2-D points");
    return {-omega_ * x[1], omega_ * x[0]};
}

Vec RotationField::exact_solution(const Vec& x0, double t) const {
    double c = std::cos(omega_ * t);
    double s = std::sin(omega_ * t);
    return {c * x0[0] - s * x0[1], s * x0[0] + c * x0[1]};
}

// ---------------------------------------------------------------------------

std::string activation_name(Activation a) {
    return a == Activation::Tanh ? "tanh" : "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw ParseError("unknown activation: " + name);
}

void time_features(double t, int count, Vec& out) {
    out.resize(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
        double freq = 2.0 * std::numbers::pi * std::ldexp(1.0, j / 2);
        out[static_cast<std::size_t>(j)] = (j % 2 == 0) ? std::sin(freq * t) : std::cos(freq * t);
    }
}

std::vector<int> MlpArch::layer_sizes() const {
    std::vector<int> sizes;
    sizes.push_back(d + time_features);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(d);
    return sizes;
}

MlpVelocity::MlpVelocity(int d, int time_feature_count, std::vector<int> layer_sizes, Activation act)
    : d_(d), time_features_(time_feature_count), layer_sizes_(std::move(layer_sizes)), activation_(act) {
    if (d_ <= 0) throw InputError("MlpVelocity: d must be positive");
    if (time_features_ < 0) throw InputError("MlpVelocity: time_features must be nonnegative");
    if (layer_sizes_.size() < 2) throw InputError("MlpVelocity: need at least one layer");
    for (int s : layer_sizes_) {
        if (s <= 0) throw InputError("MlpVelocity: layer sizes must be positive");
    }
    if (layer_sizes_.front() != d_ + time_features_) {
        throw InputError("MlpVelocity: first layer size must be d + time_features");
    }
    if (layer_sizes_.back() != d_) {
        throw InputError("MlpVelocity: last layer size must be d");
    }
    std::size_t total = 0;
    for (int l = 0; l < layer_count(); ++l) {
        w_offset_.push_back(total);
        total += static_cast<std::size_t>(layer_out(l)) * static_cast<std::size_t>(layer_in(l));
        b_offset_.push_back(total);
        total += static_cast<std::size_t>(layer_out(l));
    }
    params_.assign(total, 0.0);
}

MlpVelocity MlpVelocity::xavier_init(const MlpArch& arch, Rng& rng) {
    MlpVelocity m(arch.d, arch.time_features, arch.layer_sizes(), arch.activation);
    for (int l = 0; l < m.layer_count(); ++l) {
        double s = std::sqrt(6.0 / (m.layer_in(l) + m.layer_out(l)));
        for (int r = 0; r < m.layer_out(l); ++r) {
            for (int c = 0; c < m.layer_in(l); ++c) {
                m.weight(l, r, c) = rng.uniform(-s, s);
            }
        }
        // biases stay zero
    }
    return m;
}

namespace {

inline double activate(Activation a, double z) {
    return a == Activation::Tanh ? std::tanh(z) : z;
}

// derivative expressed through the activation value
inline double activate_deriv(Activation a, double act_value) {
    return a == Activation::Tanh ? 1.0 - act_value * act_value : 1.0;
}

void assemble_input(const MlpVelocity& m, const Vec& x, double t, Vec& input, Vec& tf_scratch) {
    if (static_cast<int>(x.size()) != m.dim()) {
        throw InputError("velocity input has dimension " + std::to_string(x.size()) + ", model expects " +
                         std::to_string(m.dim()));
    }
    input.resize(x.size() + static_cast<std::size_t>(m.time_feature_count()));
    std::copy(x.begin(), x.end(), input.begin());
    time_features(t, m.time_feature_count(), tf_scratch);
    std::copy(tf_scratch.begin(), tf_scratch.end(), input.begin() + static_cast<std::ptrdiff_t>(x.size()));
}

// z = W_l * a + b_l, with an optional LoRA term (W + A B^T) a.
void layer_affine(const MlpVelocity& m, const LoraAdapter* adapter, int l, const Vec& a, Vec& z) {
    const int in = m.layer_in(l);
    const int out = m.layer_out(l);
    const double* w = m.parameters().data() + m.weight_offset(l);
    const double* b = m.parameters().data() + m.bias_offset(l);
    z.resize(static_cast<std::size_t>(out));
    for (int r = 0; r < out; ++r) {
        double s = b[r];
        const double* row = w + static_cast<std::size_t>(r) * static_cast<std::size_t>(in);
        for (int c = 0; c < in; ++c) s += row[c] * a[static_cast<std::size_t>(c)];
        z[static_cast<std::size_t>(r)] = s;
    }
    if (adapter != nullptr) {
        const int rk = adapter->rank();
        const double* pa = adapter->parameters().data() + adapter->a_offset(l);
        const double* pb = adapter->parameters().data() + adapter->b_offset(l);
        // u = B^T a  (r)
        for (int q = 0; q < rk; ++q) {
            double u = 0.0;
            for (int c = 0; c < in; ++c) u += pb[static_cast<std::size_t>(c) * static_cast<std::size_t>(rk) + static_cast<std::size_t>(q)] * a[static_cast<std::size_t>(c)];
            for (int r = 0; r < out; ++r) {
                z[static_cast<std::size_t>(r)] += pa[static_cast<std::size_t>(r) * static_cast<std::size_t>(rk) + static_cast<std::size_t>(q)] * u;
            }
        }
    }
}

struct ForwardTrace {
    std::vector<Vec> activations;  // activations[0] = input, activations[L] = output
};

Vec forward_pass(const MlpVelocity& m, const LoraAdapter* adapter, const Vec& x, double t, ForwardTrace* trace) {
    Vec input, tf;
    assemble_input(m, x, t, input, tf);
    if (trace != nullptr) {
        trace->activations.clear();
        trace->activations.push_back(input);
    }
    Vec a = std::move(input);
    Vec z;
    const int L = m.layer_count();
    for (int l = 0; l < L; ++l) {
        layer_affine(m, adapter, l, a, z);
        if (l + 1 < L) {
            for (double& v : z) v = activate(m.activation(), v);
        }
        a = z;
        if (trace != nullptr) trace->activations.push_back(a);
    }
    return a;
}

}  // namespace

Vec MlpVelocity::velocity(const Vec& x, double t) const {
    return forward_pass(*this, nullptr, x, t, nullptr);
}

// ---------------------------------------------------------------------------

LoraAdapter::LoraAdapter(const MlpVelocity& base, int rank) : rank_(rank) {
    if (rank < 1) throw InputError("LoraAdapter: rank must be >= 1");
    std::size_t total = 0;
    for (int l = 0; l < base.layer_count(); ++l) {
        layer_in_.push_back(base.layer_in(l));
        layer_out_.push_back(base.layer_out(l));
        a_offset_.push_back(total);
        total += static_cast<std::size_t>(base.layer_out(l)) * static_cast<std::size_t>(rank);
        b_offset_.push_back(total);
        total += static_cast<std::size_t>(base.layer_in(l)) * static_cast<std::size_t>(rank);
    }
    params_.assign(total, 0.0);
}

LoraAdapter LoraAdapter::init(const MlpVelocity& base, int rank, Rng& rng) {
    LoraAdapter ad(base, rank);
    for (int l = 0; l < ad.layer_count(); ++l) {
        double* pb = ad.params_.data() + ad.b_offset(l);
        std::size_t nb = static_cast<std::size_t>(ad.layer_in(l)) * static_cast<std::size_t>(rank);
        for (std::size_t i = 0; i < nb; ++i) pb[i] = 0.01 * rng.gaussian();
        // A stays zero: adapted model == base model at initialization
    }
    return ad;
}

void LoraAdapter::check_compatible(const MlpVelocity& model) const {
    bool ok = layer_count() == model.layer_count();
    for (int l = 0; ok && l < layer_count(); ++l) {
        ok = layer_in(l) == model.layer_in(l) && layer_out(l) == model.layer_out(l);
    }
    if (!ok) throw InputError("LoraAdapter: shapes do not match the model's layers");
}

AdaptedVelocity::AdaptedVelocity(const MlpVelocity& base, const LoraAdapter& adapter)
    : base_(&base), adapter_(&adapter) {
    adapter.check_compatible(base);
}

Vec AdaptedVelocity::velocity(const Vec& x, double t) const {
    return forward_pass(*base_, adapter_, x, t, nullptr);
}

Vec lora_forward(const MlpVelocity& model, const LoraAdapter& adapter, const Vec& x, double t) {
    adapter.check_compatible(model);
    return forward_pass(model, &adapter, x, t, nullptr);
}

// ---------------------------------------------------------------------------

void ResidualBatch::add(Vec xi, double ti, Vec yi, double wi) {
    x.push_back(std::move(xi));
    t.push_back(ti);
    target.push_back(std::move(yi));
    weight.push_back(wi);
}

namespace {

// Shared backprop over the weighted squared-residual objective. When adapter
// is null, grad covers the model parameters; otherwise grad covers only the
// adapter's A/B blocks and the base is left alone.
double loss_grad_impl(const MlpVelocity& m, const LoraAdapter* adapter, const ResidualBatch& batch,
                      std::vector<double>* grad) {
    if (batch.size() == 0) throw InputError("loss: empty batch");
    if (batch.t.size() != batch.size() || batch.target.size() != batch.size() ||
        batch.weight.size() != batch.size()) {
        throw InputError("loss: batch fields have mismatched lengths");
    }
    if (grad != nullptr) {
        grad->assign(adapter != nullptr ? adapter->parameters().size() : m.parameter_count(), 0.0);
    }

    const int L = m.layer_count();
    double loss = 0.0;
    ForwardTrace trace;
    Vec delta, delta_prev;

    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch.target[i].size() != static_cast<std::size_t>(m.dim())) {
            throw InputError("loss: target dimension mismatch at sample " + std::to_string(i));
        }
        const double w = batch.weight[i];
        Vec out = forward_pass(m, adapter, batch.x[i], batch.t[i], grad != nullptr ? &trace : nullptr);
        double term = 0.0;
        for (std::size_t k = 0; k < out.size(); ++k) {
            double r = out[k] - batch.target[i][k];
            term += r * r;
        }
        loss += w * term;
        if (grad == nullptr) continue;

        delta.resize(out.size());
        for (std::size_t k = 0; k < out.size(); ++k) {
            delta[k] = 2.0 * w * (out[k] - batch.target[i][k]);
        }

        for (int l = L - 1; l >= 0; --l) {
            const Vec& a_in = trace.activations[static_cast<std::size_t>(l)];
            const int in = m.layer_in(l);
            const int out_n = m.layer_out(l);

            if (adapter == nullptr) {
                double* gw = grad->data() + m.weight_offset(l);
                double* gb = grad->data() + m.bias_offset(l);
                for (int r = 0; r < out_n; ++r) {
                    const double dr = delta[static_cast<std::size_t>(r)];
                    gb[r] += dr;
                    double* grow = gw + static_cast<std::size_t>(r) * static_cast<std::size_t>(in);
                    for (int c = 0; c < in; ++c) grow[c] += dr * a_in[static_cast<std::size_t>(c)];
                }
            } else {
                const int rk = adapter->rank();
                double* ga = grad->data() + adapter->a_offset(l);
                double* gb = grad->data() + adapter->b_offset(l);
                const double* pa = adapter->parameters().data() + adapter->a_offset(l);
                const double* pb = adapter->parameters().data() + adapter->b_offset(l);
                for (int q = 0; q < rk; ++q) {
                    // u_q = (B^T a)_q, s_q = (A^T delta)_q
                    double u = 0.0, s = 0.0;
                    for (int c = 0; c < in; ++c) u += pb[static_cast<std::size_t>(c) * static_cast<std::size_t>(rk) + static_cast<std::size_t>(q)] * a_in[static_cast<std::size_t>(c)];
                    for (int r = 0; r < out_n; ++r) s += pa[static_cast<std::size_t>(r) * static_cast<std::size_t>(rk) + static_cast<std::size_t>(q)] * delta[static_cast<std::size_t>(r)];
                    for (int r = 0; r < out_n; ++r) ga[static_cast<std::size_t>(r) * static_cast<std::size_t>(rk) + static_cast<std::size_t>(q)] += delta[static_cast<std::size_t>(r)] * u;
                    for (int c = 0; c < in; ++c) gb[static_cast<std::size_t>(c) * static_cast<std::size_t>(rk) + static_cast<std::size_t>(q)] += a_in[static_cast<std::size_t>(c)] * s;
                }
            }

            if (l == 0) break;
            // delta_prev = W_eff^T delta, then through the activation derivative
            delta_prev.assign(static_cast<std::size_t>(in), 0.0);
            const double* w_base = m.parameters().data() + m.weight_offset(l);
            for (int r = 0; r < out_n; ++r) {
                const double dr = delta[static_cast<std::size_t>(r)];
                const double* row = w_base + static_cast<std::size_t>(r) * static_cast<std::size_t>(in);
                for (int c = 0; c < in; ++c) delta_prev[static_cast<std::size_t>(c)] += row[c] * dr;
            }
            if (adapter != nullptr) {
                const int rk = adapter->rank();
                const double* pa = adapter->parameters().data() + adapter->a_offset(l);
                const double* pb = adapter->parameters().data() + adapter->b_offset(l);
                for (int q = 0; q < rk; ++q) {
                    double s = 0.0;
                    for (int r = 0; r < out_n; ++r) s += pa[static_cast<std::size_t>(r) * static_cast<std::size_t>(rk) + static_cast<std::size_t>(q)] * delta[static_cast<std::size_t>(r)];
                    for (int c = 0; c < in; ++c) delta_prev[static_cast<std::size_t>(c)] += pb[static_cast<std::size_t>(c) * static_cast<std::size_t>(rk) + static_cast<std::size_t>(q)] * s;
                }
            }
            for (int c = 0; c < in; ++c) {
                delta_prev[static_cast<std::size_t>(c)] *= activate_deriv(m.activation(), trace.activations[static_cast<std::size_t>(l)][static_cast<std::size_t>(c)]);
            }
            delta = delta_prev;
        }
    }
    return loss;
}

}  // namespace

double mlp_loss_grad(const MlpVelocity& model, const ResidualBatch& batch, std::vector<double>& grad) {
    return loss_grad_impl(model, nullptr, batch, &grad);
}

double lora_loss_grad(const MlpVelocity& model, const LoraAdapter& adapter, const ResidualBatch& batch,
                      std::vector<double>& grad) {
    adapter.check_compatible(model);
    return loss_grad_impl(model, &adapter, batch, &grad);
}

double mlp_loss(const MlpVelocity& model, const ResidualBatch& batch) {
    return loss_grad_impl(model, nullptr, batch, nullptr);
}

// ---------------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const MlpVelocity& model, const LoraAdapter* adapter,
                     const std::string& provenance) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["d"] = model.dim();
    j["time_features"] = model.time_feature_count();
    j["layer_sizes"] = model.layer_sizes();
    j["activation"] = activation_name(model.activation());
    j["parameters"] = model.parameters();
    if (adapter != nullptr) {
        adapter->check_compatible(model);
        nlohmann::json lo;
        lo["rank"] = adapter->rank();
        std::vector<std::vector<double>> as, bs;
        for (int l = 0; l < adapter->layer_count(); ++l) {
            std::size_t na = static_cast<std::size_t>(adapter->layer_out(l)) * static_cast<std::size_t>(adapter->rank());
            std::size_t nb = static_cast<std::size_t>(adapter->layer_in(l)) * static_cast<std::size_t>(adapter->rank());
            const double* p = adapter->parameters().data();
            as.emplace_back(p + adapter->a_offset(l), p + adapter->a_offset(l) + na);
            bs.emplace_back(p + adapter->b_offset(l), p + adapter->b_offset(l) + nb);
        }
        lo["a"] = as;
        lo["b"] = bs;
        j["lora"] = lo;
    }
    if (!provenance.empty()) j["provenance"] = provenance;
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open checkpoint for writing: " + path.string());
    out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open checkpoint: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("checkpoint " + path.string() + ": " + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != 1) {
            throw ParseError("checkpoint " + path.string() + ": unsupported format_version");
        }
        MlpVelocity model(j.at("d").get<int>(), j.at("time_features").get<int>(),
                          j.at("layer_sizes").get<std::vector<int>>(),
                          activation_from_name(j.at("activation").get<std::string>()));
        auto params = j.at("parameters").get<std::vector<double>>();
        if (params.size() != model.parameter_count()) {
            throw ParseError("checkpoint " + path.string() + ": parameter count " +
                             std::to_string(params.size()) + " does not match layer sizes (expected " +
                             std::to_string(model.parameter_count()) + ")");
        }
        model.parameters() = std::move(params);

        std::optional<LoraAdapter> adapter;
        if (j.contains("lora")) {
            const auto& lo = j.at("lora");
            LoraAdapter ad(model, lo.at("rank").get<int>());
            auto as = lo.at("a").get<std::vector<std::vector<double>>>();
            auto bs = lo.at("b").get<std::vector<std::vector<double>>>();
            if (static_cast<int>(as.size()) != ad.layer_count() || static_cast<int>(bs.size()) != ad.layer_count()) {
                throw ParseError("checkpoint " + path.string() + ": lora layer count mismatch");
            }
            for (int l = 0; l < ad.layer_count(); ++l) {
                std::size_t na = static_cast<std::size_t>(ad.layer_out(l)) * static_cast<std::size_t>(ad.rank());
                std::size_t nb = static_cast<std::size_t>(ad.layer_in(l)) * static_cast<std::size_t>(ad.rank());
                if (as[static_cast<std::size_t>(l)].size() != na || bs[static_cast<std::size_t>(l)].size() != nb) {
                    throw ParseError("checkpoint " + path.string() + ": lora block size mismatch at layer " +
                                     std::to_string(l));
                }
                std::copy(as[static_cast<std::size_t>(l)].begin(), as[static_cast<std::size_t>(l)].end(),
                          ad.parameters().begin() + static_cast<std::ptrdiff_t>(ad.a_offset(l)));
                std::copy(bs[static_cast<std::size_t>(l)].begin(), bs[static_cast<std::size_t>(l)].end(),
                          ad.parameters().begin() + static_cast<std::ptrdiff_t>(ad.b_offset(l)));
            }
            adapter = std::move(ad);
        }
        return Checkpoint{std::move(model), std::move(adapter)};
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("checkpoint " + path.string() + ": " + e.what());
    }
}

}  // namespace boss
