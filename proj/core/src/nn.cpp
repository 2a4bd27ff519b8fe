#include "qrac/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace qrac::nn {

namespace {

void check_spec(const LayerSpec& s) {
    if (s.input_width < 1 || s.output_width < 1) {
        throw std::invalid_argument("layer widths must be >= 1");
    }
}

} // namespace

ParameterSet make_params(const std::vector<LayerSpec>& specs, Rng& rng) {
    ParameterSet params;
    params.layers.reserve(specs.size());
    for (const auto& spec : specs) {
        check_spec(spec);
        LayerParams layer;
        layer.in = spec.input_width;
        layer.out = spec.output_width;
        layer.activation = spec.activation;
        layer.weights.resize(static_cast<std::size_t>(layer.in) * layer.out);
        layer.bias.assign(layer.out, 0.0);
        const double bound = std::sqrt(6.0 / (layer.in + layer.out));
        for (auto& w : layer.weights) w = rng.uniform(-bound, bound);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

GradientSet zero_grads_like(const ParameterSet& params) {
    GradientSet grads;
    grads.layers.resize(params.layers.size());
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        grads.layers[i].weights.assign(params.layers[i].weights.size(), 0.0);
        grads.layers[i].bias.assign(params.layers[i].bias.size(), 0.0);
    }
    return grads;
}

std::vector<double> forward_range(const ParameterSet& params, std::size_t first,
                                  std::size_t count, std::span<const double> input,
                                  ForwardCache* cache) {
    if (first + count > params.layers.size()) {
        throw std::invalid_argument("layer range out of bounds");
    }
    if (cache) {
        cache->first = first;
        cache->count = count;
        cache->inputs.assign(count, {});
        cache->outputs.assign(count, {});
    }
    std::vector<double> x(input.begin(), input.end());
    for (std::size_t li = 0; li < count; ++li) {
        const LayerParams& layer = params.layers[first + li];
        if (static_cast<int>(x.size()) != layer.in) {
            throw std::invalid_argument("input width does not match layer");
        }
        if (cache) cache->inputs[li] = x;
        std::vector<double> y(layer.out);
        for (int j = 0; j < layer.out; ++j) {
            double acc = layer.bias[j];
            const double* wrow = layer.weights.data() + static_cast<std::size_t>(j) * layer.in;
            for (int i = 0; i < layer.in; ++i) acc += wrow[i] * x[i];
            y[j] = acc;
        }
        if (layer.activation == Activation::Relu) {
            for (auto& v : y) v = v > 0.0 ? v : 0.0;
        }
        if (cache) cache->outputs[li] = y;
        x = std::move(y);
    }
    return x;
}

std::vector<double> forward(const ParameterSet& params, std::span<const double> input,
                            ForwardCache* cache) {
    return forward_range(params, 0, params.layers.size(), input, cache);
}

std::vector<double> backward_range(const ParameterSet& params, const ForwardCache& cache,
                                   std::span<const double> output_grad, GradientSet& grads) {
    if (grads.layers.size() != params.layers.size()) {
        throw std::logic_error("gradient set shape mismatch");
    }
    if (cache.count == 0) {
        return std::vector<double>(output_grad.begin(), output_grad.end());
    }
    std::vector<double> dy(output_grad.begin(), output_grad.end());
    for (std::size_t li = cache.count; li-- > 0;) {
        const LayerParams& layer = params.layers[cache.first + li];
        const std::vector<double>& x = cache.inputs[li];
        const std::vector<double>& y = cache.outputs[li];
        if (dy.size() != static_cast<std::size_t>(layer.out) ||
            x.size() != static_cast<std::size_t>(layer.in)) {
            throw std::logic_error("stale or mismatched forward cache");
        }
        LayerGrads& lg = grads.layers[cache.first + li];
        std::vector<double> dx(layer.in, 0.0);
        for (int j = 0; j < layer.out; ++j) {
            double dpre = dy[j];
            if (layer.activation == Activation::Relu && y[j] <= 0.0) dpre = 0.0;
            if (dpre == 0.0) continue;
            lg.bias[j] += dpre;
            const std::size_t row = static_cast<std::size_t>(j) * layer.in;
            const double* wrow = layer.weights.data() + row;
            double* grow = lg.weights.data() + row;
            for (int i = 0; i < layer.in; ++i) {
                grow[i] += dpre * x[i];
                dx[i] += dpre * wrow[i];
            }
        }
        dy = std::move(dx);
    }
    return dy;
}

GradientSet backward(const ParameterSet& params, const ForwardCache& cache,
                     std::span<const double> output_grad) {
    GradientSet grads = zero_grads_like(params);
    backward_range(params, cache, output_grad, grads);
    return grads;
}

double global_norm(const GradientSet& grads) {
    double sq = 0.0;
    for (const auto& layer : grads.layers) {
        for (double w : layer.weights) sq += w * w;
        for (double b : layer.bias) sq += b * b;
    }
    return std::sqrt(sq);
}

void clip_global_norm(GradientSet& grads, double max_norm) {
    if (!(max_norm > 0.0)) throw std::invalid_argument("max_norm must be > 0");
    if (!all_finite(grads)) throw std::runtime_error("non-finite gradient entries");
    const double norm = global_norm(grads);
    // Slack of one part in 1e12 keeps repeated clipping from re-scaling a
    // gradient that already sits at the bound up to rounding.
    if (norm <= max_norm * (1.0 + 1e-12)) return;
    scale(grads, max_norm / norm);
}

void axpy(GradientSet& dst, double a, const GradientSet& x) {
    for (std::size_t li = 0; li < dst.layers.size(); ++li) {
        auto& d = dst.layers[li];
        const auto& s = x.layers[li];
        for (std::size_t i = 0; i < d.weights.size(); ++i) d.weights[i] += a * s.weights[i];
        for (std::size_t i = 0; i < d.bias.size(); ++i) d.bias[i] += a * s.bias[i];
    }
}

void scale(GradientSet& grads, double a) {
    for (auto& layer : grads.layers) {
        for (auto& w : layer.weights) w *= a;
        for (auto& b : layer.bias) b *= a;
    }
}

bool all_finite(const GradientSet& grads) {
    for (const auto& layer : grads.layers) {
        for (double w : layer.weights) {
            if (!std::isfinite(w)) return false;
        }
        for (double b : layer.bias) {
            if (!std::isfinite(b)) return false;
        }
    }
    return true;
}

AdamState make_adam_state(const ParameterSet& params) {
    AdamState state;
    state.first_moment = zero_grads_like(params);
    state.second_moment = zero_grads_like(params);
    return state;
}

namespace {

void adam_update_span(std::span<double> p, std::span<const double> g, std::span<double> m,
                      std::span<double> v, const AdamState& s, double lr) {
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
        v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + s.epsilon);
    }
}

} // namespace

void adam_step(ParameterSet& params, const GradientSet& grads, AdamState& state, double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    if (grads.layers.size() != params.layers.size()) {
        throw std::invalid_argument("gradient/parameter shape mismatch");
    }
    state.step_count += 1;
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        auto& layer = params.layers[li];
        adam_update_span(layer.weights, grads.layers[li].weights,
                         state.first_moment.layers[li].weights,
                         state.second_moment.layers[li].weights, state, lr);
        adam_update_span(layer.bias, grads.layers[li].bias, state.first_moment.layers[li].bias,
                         state.second_moment.layers[li].bias, state, lr);
    }
}

double gradient_check(const ParameterSet& params,
                      const std::function<double(const ParameterSet&)>& loss_fn,
                      const GradientSet& analytic, double eps) {
    ParameterSet probe = params;
    double max_rel = 0.0;
    auto check_entry = [&](double& entry, double analytic_grad) {
        const double saved = entry;
        entry = saved + eps;
        const double up = loss_fn(probe);
        entry = saved - eps;
        const double down = loss_fn(probe);
        entry = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double denom = std::max({std::fabs(analytic_grad), std::fabs(numeric), 1e-8});
        const double rel = std::fabs(analytic_grad - numeric) / denom;
        if (rel > max_rel) max_rel = rel;
    };
    for (std::size_t li = 0; li < probe.layers.size(); ++li) {
        auto& layer = probe.layers[li];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            check_entry(layer.weights[i], analytic.layers[li].weights[i]);
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            check_entry(layer.bias[i], analytic.layers[li].bias[i]);
        }
    }
    return max_rel;
}

} // namespace qrac::nn
