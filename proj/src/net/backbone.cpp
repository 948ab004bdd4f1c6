#include "protofs/net/backbone.hpp"

#include <cctype>
#include <cmath>
#include <type_traits>

#include "protofs/core/errors.hpp"
#include "protofs/core/rng.hpp"

namespace protofs::net {

std::string to_string(BackboneKind kind) {
    switch (kind) {
    case BackboneKind::ConvNet4: return "ConvNet4";
    case BackboneKind::MLP: return "MLP";
    case BackboneKind::Identity: return "Identity";
    }
    return "?";
}

BackboneKind parse_backbone_kind(std::string_view name) {
    std::string lower(name);
    for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (lower == "convnet4") return BackboneKind::ConvNet4;
    if (lower == "mlp") return BackboneKind::MLP;
    if (lower == "identity") return BackboneKind::Identity;
    throw ConfigError("unknown backbone kind '" + std::string(name) + "'");
}

std::size_t convnet4_output_side(std::size_t side) {
    for (int block = 0; block < 4; ++block) {
        if (side >= 2) side /= 2;
    }
    return side;
}

namespace {

Tensor he_uniform(Shape shape, std::size_t fan_in, Rng rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> values(shape_size(shape));
    for (auto& v : values) v = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(values), true);
}

} // namespace

Backbone build(const BackboneConfig& config, std::uint64_t seed) {
    Backbone b;
    b.config_ = config;
    const Rng root(seed, 0x696e6974);
    switch (config.kind) {
    case BackboneKind::ConvNet4: {
        if (config.input.size() != 3) {
            throw ConfigError("ConvNet4 needs a CxHxW input spec, got " + shape_string(config.input));
        }
        if (config.filters == 0) throw ConfigError("ConvNet4 needs at least one filter");
        std::size_t channels = config.input[0];
        for (std::size_t i = 0; i < 4; ++i) {
            const auto prefix = "block" + std::to_string(i);
            b.params_.push_back({prefix + ".conv.weight",
                                 he_uniform({config.filters, channels, 3, 3}, channels * 9, root.split(i))});
            b.params_.push_back({prefix + ".bn.gamma", Tensor::filled({config.filters}, 1.0, true)});
            b.params_.push_back({prefix + ".bn.beta", Tensor::zeros({config.filters}, true)});
            b.bn_.push_back({prefix + ".bn", BatchNormStats::fresh(config.filters)});
            channels = config.filters;
        }
        b.embed_dim_ = config.filters * convnet4_output_side(config.input[1]) * convnet4_output_side(config.input[2]);
        break;
    }
    case BackboneKind::MLP: {
        if (config.input.size() != 1) throw ConfigError("MLP needs a flat input spec, got " + shape_string(config.input));
        if (config.hidden.empty()) throw ConfigError("MLP needs at least one layer width");
        std::size_t width = config.input[0];
        for (std::size_t i = 0; i < config.hidden.size(); ++i) {
            const auto prefix = "fc" + std::to_string(i);
            if (config.hidden[i] == 0) throw ConfigError("MLP layer widths must be positive");
            b.params_.push_back({prefix + ".weight", he_uniform({width, config.hidden[i]}, width, root.split(i))});
            b.params_.push_back({prefix + ".bias", Tensor::zeros({config.hidden[i]}, true)});
            width = config.hidden[i];
        }
        b.embed_dim_ = width;
        break;
    }
    case BackboneKind::Identity:
        if (config.input.size() != 1) {
            throw ConfigError("Identity needs pre-featurized flat input, got " + shape_string(config.input));
        }
        b.embed_dim_ = config.input[0];
        break;
    }
    return b;
}

std::size_t Backbone::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void Backbone::check_input(const Tensor& x) const {
    const auto& spec = config_.input;
    bool ok = x.defined() && x.rank() == spec.size() + 1;
    for (std::size_t i = 0; ok && i < spec.size(); ++i) ok = x.dim(i + 1) == spec[i];
    if (!ok) {
        throw DimensionError(to_string(kind()) + " expects [B]+" + shape_string(spec) + " input, got " +
                             (x.defined() ? shape_string(x.shape()) : std::string("undefined")));
    }
}

template <typename Self, typename Stats>
Tensor Backbone::run(Self& self, Tape& tape, const Tensor& x, RunMode mode, Stats* stats) {
    self.check_input(x);
    const auto batch = x.dim(0);
    const auto& params = self.params_;
    switch (self.config_.kind) {
    case BackboneKind::Identity:
        return reshape(tape, x, {batch, self.embed_dim_});
    case BackboneKind::MLP: {
        Tensor h = x;
        const auto layers = params.size() / 2;
        for (std::size_t i = 0; i < layers; ++i) {
            h = linear(tape, h, params[2 * i].value, params[2 * i + 1].value);
            if (i + 1 < layers) h = relu(tape, h);
        }
        return h;
    }
    case BackboneKind::ConvNet4: {
        Tensor h = x;
        const Tensor no_bias = Tensor::zeros({self.config_.filters});
        for (std::size_t i = 0; i < 4; ++i) {
            h = conv2d_3x3(tape, h, params[3 * i].value, no_bias);
            if constexpr (std::is_const_v<Stats>) {
                h = batchnorm_eval(tape, h, params[3 * i + 1].value, params[3 * i + 2].value, stats[i].stats);
            } else {
                h = batchnorm(tape, h, params[3 * i + 1].value, params[3 * i + 2].value, stats[i].stats, mode);
            }
            h = relu(tape, h);
            if (h.dim(2) >= 2 && h.dim(3) >= 2) h = maxpool2(tape, h);
        }
        return reshape(tape, h, {batch, self.embed_dim_});
    }
    }
    throw ContractError("unreachable backbone kind");
}

Tensor Backbone::forward(Tape& tape, const Tensor& x, RunMode mode) {
    return run(*this, tape, x, mode, bn_.data());
}

Tensor Backbone::forward(Tape& tape, const Tensor& x) const {
    return run(*this, tape, x, RunMode::Eval, bn_.data());
}

void Backbone::zero_grad() {
    for (auto& p : params_) p.value.zero_grad();
}

Backbone Backbone::clone() const {
    Backbone copy = *this;
    for (auto& p : copy.params_) {
        p.value = p.value.clone();
        p.value.set_requires_grad(true);
    }
    return copy;
}

std::vector<std::pair<std::string, Shape>> Backbone::manifest() const {
    std::vector<std::pair<std::string, Shape>> out;
    for (const auto& p : params_) out.emplace_back(p.name, p.value.shape());
    for (const auto& s : bn_) {
        out.emplace_back(s.name + ".running_mean", Shape{s.stats.running_mean.size()});
        out.emplace_back(s.name + ".running_var", Shape{s.stats.running_var.size()});
    }
    return out;
}

} // namespace protofs::net
