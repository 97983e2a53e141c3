#pragma once

#include <json.hpp>
#include <map>
#include <string>

#include "planoforge/graph.hpp"
#include "planoforge/tensor.hpp"

namespace planoforge {

// Two-level U-Net over {C,S,K} grids: strided-conv downsamples, mirrored
// nearest-neighbor upsamples with skip concatenation, sinusoidal time
// embedding projected into every residual block, one self-attention layer at
// the bottleneck. Two constant position planes (row and column fraction) are
// appended to the input so shelf height is observable despite the
// translation-equivariant convolutions. Fully convolutional: any S,K works.
struct DenoiserConfig {
    int in_channels = 5;
    std::array<int, 3> widths = {32, 64, 128};
    int time_embed_dim = 64;
    bool attention = true;

    nlohmann::json to_json() const;
    static DenoiserConfig from_json(const nlohmann::json& j);
};

class DenoiserModel {
  public:
    DenoiserModel() = default;
    DenoiserModel(DenoiserConfig cfg, std::map<std::string, Tensor> params)
        : cfg_(cfg), params_(std::move(params)) {}

    // He-initialized convolutions; the output convolution and the attention
    // projection start at zero, so a fresh model predicts zero noise.
    static DenoiserModel init(const DenoiserConfig& cfg, std::uint64_t seed);

    const DenoiserConfig& config() const { return cfg_; }
    const std::map<std::string, Tensor>& parameters() const { return params_; }
    std::map<std::string, Tensor>& parameters() { return params_; }
    std::size_t parameter_count() const;

    // Noise prediction subgraph. With trainable=true parameters register as
    // graph params (named as in parameters()); otherwise they enter as plain
    // inputs.
    NodeId predict(Graph& g, NodeId x, int t, int total_steps, bool trainable) const;

    Tensor predict_value(const Tensor& x, int t, int total_steps) const;

    static Tensor time_embedding(int t, int total_steps, int dim);

  private:
    DenoiserConfig cfg_;
    std::map<std::string, Tensor> params_;
};

}  // namespace planoforge
