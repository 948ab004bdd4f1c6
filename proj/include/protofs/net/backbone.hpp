#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "protofs/diff/ops.hpp"

namespace protofs::net {

enum class BackboneKind { ConvNet4, MLP, Identity };

std::string to_string(BackboneKind kind);
BackboneKind parse_backbone_kind(std::string_view name);

struct BackboneConfig {
    BackboneKind kind = BackboneKind::MLP;
    /// Per-sample input shape: {C,H,W} for ConvNet4, {D} otherwise.
    Shape input;
    /// MLP layer widths; the last one is the embedding width.
    std::vector<std::size_t> hidden{64, 32};
    /// ConvNet4 filters per block.
    std::size_t filters = 64;
};

struct Parameter {
    std::string name;
    Tensor value;
};

struct NamedStats {
    std::string name;
    BatchNormStats stats;
};

/// Embedding network f(x) mapping a batch [B, input...] to [B, embed_dim].
///
/// ConvNet4 stacks four blocks of 3x3 conv (no bias), batch norm, ReLU and
/// 2x2 max-pool; the pool is skipped once the feature map is smaller than 2x2.
/// MLP is linear layers with ReLU between them. Identity flattens its input.
class Backbone {
public:
    const BackboneConfig& config() const { return config_; }
    BackboneKind kind() const { return config_.kind; }
    const Shape& input_spec() const { return config_.input; }
    std::size_t embed_dim() const { return embed_dim_; }

    std::vector<Parameter>& parameters() { return params_; }
    const std::vector<Parameter>& parameters() const { return params_; }
    std::vector<NamedStats>& batchnorm_stats() { return bn_; }
    const std::vector<NamedStats>& batchnorm_stats() const { return bn_; }
    std::size_t parameter_count() const;

    const std::string& provenance() const { return provenance_; }
    void set_provenance(std::string note) { provenance_ = std::move(note); }

    /// Train mode updates batch-norm running statistics.
    Tensor forward(Tape& tape, const Tensor& x, RunMode mode);
    /// Eval-mode forward; pure.
    Tensor forward(Tape& tape, const Tensor& x) const;

    void zero_grad();
    /// Deep copy of parameters and statistics.
    Backbone clone() const;

    /// Shape of every parameter array followed by every statistics array,
    /// in checkpoint order.
    std::vector<std::pair<std::string, Shape>> manifest() const;

private:
    friend Backbone build(const BackboneConfig& config, std::uint64_t seed);

    template <typename Self, typename Stats>
    static Tensor run(Self& self, Tape& tape, const Tensor& x, RunMode mode, Stats* stats);

    void check_input(const Tensor& x) const;

    BackboneConfig config_;
    std::size_t embed_dim_ = 0;
    std::vector<Parameter> params_;
    std::vector<NamedStats> bn_;
    std::string provenance_ = "random-init";
};

/// Deterministic He-uniform initialization; biases and beta zero, gamma one.
Backbone build(const BackboneConfig& config, std::uint64_t seed);

/// Spatial side after the ConvNet4 pooling schedule.
std::size_t convnet4_output_side(std::size_t side);

} // namespace protofs::net
