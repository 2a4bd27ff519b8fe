#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "qrac/rng.hpp"

namespace qrac::nn {

enum class Activation { Relu, Linear, SoftmaxLogits };

struct LayerSpec {
    int input_width = 0;
    int output_width = 0;
    Activation activation = Activation::Linear;
};

// One dense layer: weights row-major [out][in], bias [out].
// SoftmaxLogits is an identity forward; the label marks a policy head whose
// output is to be read as unnormalized log-probabilities.
struct LayerParams {
    int in = 0;
    int out = 0;
    Activation activation = Activation::Linear;
    std::vector<double> weights;
    std::vector<double> bias;
};

// Ordered list of dense layers. Agents may wire sub-ranges of the list into
// a DAG (trunk feeding several heads); the chain operations below therefore
// take an explicit [first, count) layer range.
struct ParameterSet {
    std::vector<LayerParams> layers;
};

struct LayerGrads {
    std::vector<double> weights;
    std::vector<double> bias;
};

struct GradientSet {
    std::vector<LayerGrads> layers;
};

// Activation record for one forward pass over a layer range.
struct ForwardCache {
    std::size_t first = 0;
    std::size_t count = 0;
    std::vector<std::vector<double>> inputs;  // input vector per layer
    std::vector<std::vector<double>> outputs; // post-activation per layer
};

ParameterSet make_params(const std::vector<LayerSpec>& specs, Rng& rng);
GradientSet zero_grads_like(const ParameterSet& params);

// Forward over layers [first, first+count). Returns the final output; fills
// cache (if non-null) with everything the backward pass needs.
std::vector<double> forward_range(const ParameterSet& params, std::size_t first,
                                  std::size_t count, std::span<const double> input,
                                  ForwardCache* cache = nullptr);

// Full-chain forward.
std::vector<double> forward(const ParameterSet& params, std::span<const double> input,
                            ForwardCache* cache = nullptr);

// Backward over the range recorded in cache; accumulates parameter gradients
// into grads and returns the gradient w.r.t. the range input.
std::vector<double> backward_range(const ParameterSet& params, const ForwardCache& cache,
                                   std::span<const double> output_grad, GradientSet& grads);

// Full-chain backward; cache must come from a matching forward call.
GradientSet backward(const ParameterSet& params, const ForwardCache& cache,
                     std::span<const double> output_grad);

double global_norm(const GradientSet& grads);

// Scales grads so the global L2 norm does not exceed max_norm. Idempotent:
// a gradient already at (or a rounding hair above) the bound is left alone.
void clip_global_norm(GradientSet& grads, double max_norm);

// dst += a * x (shape-compatible gradient accumulation).
void axpy(GradientSet& dst, double a, const GradientSet& x);
void scale(GradientSet& grads, double a);
bool all_finite(const GradientSet& grads);

struct AdamState {
    GradientSet first_moment;
    GradientSet second_moment;
    long step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

AdamState make_adam_state(const ParameterSet& params);

// Bias-corrected Adam update, in place.
void adam_step(ParameterSet& params, const GradientSet& grads, AdamState& state, double lr);

// Max relative error between the analytic gradient and central finite
// differences of loss_fn, over every parameter entry.
double gradient_check(const ParameterSet& params,
                      const std::function<double(const ParameterSet&)>& loss_fn,
                      const GradientSet& analytic, double eps);

} // namespace qrac::nn
