#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace chainnas {

/// Layer-type identifier. Names come from an OpRegistry; START and OUTPUT are
/// virtual states that only appear inside transition chains.
class OpType {
public:
    OpType() = default;
    explicit OpType(std::string name) : name_(std::move(name)) {}

    static OpType start() { return OpType("START"); }
    static OpType output() { return OpType("OUTPUT"); }

    const std::string& name() const { return name_; }
    bool is_virtual() const { return name_ == "START" || name_ == "OUTPUT"; }

    auto operator<=>(const OpType&) const = default;
    bool operator==(const OpType&) const = default;

private:
    std::string name_;
};

/// Shape semantics shared by every operation of the same kind.
enum class OpKind {
    Conv,
    BatchNorm,
    Elementwise,   // activations, dropout: shape preserving on any rank
    Pool,
    AdaptivePool,
    Linear,
    Flatten,
    ChannelShuffle,
};

std::string_view to_string(OpKind kind);
std::optional<OpKind> op_kind_from_string(std::string_view text);

struct OpSpec {
    OpType type;
    OpKind kind;
    std::vector<std::string> integer_keys;
    std::vector<std::string> real_keys;
};

/// Closed set of operations a description may use. The builtin registry
/// mirrors data/registry.json; additional operations can be loaded from a
/// registry document as long as they reuse one of the known OpKinds.
class OpRegistry {
public:
    static const OpRegistry& builtin();
    static OpRegistry from_json(std::string_view text);

    void add(OpSpec spec);
    const OpSpec* find(std::string_view name) const;
    const OpSpec& at(const OpType& type) const;
    std::vector<OpType> types() const;
    std::size_t size() const { return specs_.size(); }

    std::string to_json() const;

private:
    std::map<std::string, OpSpec, std::less<>> specs_;
};

/// Operation parameters. Dimensions are stored as integral doubles so that a
/// component tuple is one homogeneous map; dropout_p is the only real key in
/// the builtin registry.
using Components = std::map<std::string, double>;

struct Layer {
    OpType op;
    Components components;
    bool is_residual_block = false;

    std::int64_t get(const std::string& key) const;
    bool operator==(const Layer&) const = default;
};

struct TensorShape {
    // rank 3 = (channels, height, width), rank 1 = (features)
    int rank = 3;
    std::int64_t channels = 0;
    std::int64_t height = 0;
    std::int64_t width = 0;

    static TensorShape spatial(std::int64_t c, std::int64_t h, std::int64_t w) { return {3, c, h, w}; }
    static TensorShape flat(std::int64_t f) { return {1, f, 1, 1}; }

    bool is_flat() const { return rank == 1; }
    std::int64_t features() const { return channels; }
    std::int64_t elements() const { return is_flat() ? channels : channels * height * width; }
    std::string str() const;
    bool operator==(const TensorShape&) const = default;
};

struct Architecture {
    std::string name;
    std::vector<Layer> layers;
    TensorShape input_shape = TensorShape::spatial(3, 32, 32);
    std::int64_t num_classes = 10;

    // name is document metadata and takes no part in equality or hashing
    bool operator==(const Architecture& other) const {
        return layers == other.layers && input_shape == other.input_shape &&
               num_classes == other.num_classes;
    }
};

using ShapeTrace = std::vector<TensorShape>;

enum class ViolationKind {
    EmptyArchitecture,
    InvalidInputShape,
    UnknownOp,
    VirtualOpInLayers,
    MissingComponent,
    UnexpectedComponent,
    InvalidComponent,
    ResidualNotConv,
    ChannelMismatch,
    FeatureMismatch,
    GroupMismatch,
    SpatialCollapse,
    RequiresSpatialInput,
    LinearOnSpatialInput,
    MissingClassifierHead,
    ClassCountMismatch,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    std::size_t layer = 0;  // index into layers; layers.size() for whole-architecture issues
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool contains(ViolationKind kind) const;
    std::string str() const;
};

class ArchError : public std::runtime_error {
public:
    ArchError(ViolationKind kind, std::size_t layer, const std::string& what)
        : std::runtime_error(what), kind_(kind), layer_(layer) {}
    ViolationKind kind() const { return kind_; }
    std::size_t layer() const { return layer_; }

private:
    ViolationKind kind_;
    std::size_t layer_;
};

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised for documents naming an operation outside the registry.
class UnknownOpError : public ParseError {
public:
    explicit UnknownOpError(const std::string& op)
        : ParseError("unknown operation '" + op + "'"), op_(op) {}
    const std::string& op() const { return op_; }

private:
    std::string op_;
};

Architecture parse_architecture(std::string_view text,
                                const OpRegistry& registry = OpRegistry::builtin());
Architecture load_architecture(const std::string& path,
                               const OpRegistry& registry = OpRegistry::builtin());

/// Canonical document: sorted keys, two-space indent, trailing newline.
/// `residual_block` is written only when set.
std::string serialize_architecture(const Architecture& arch);

/// Output shape of one layer. Throws ArchError on the first problem.
TensorShape apply_layer(const Layer& layer, const TensorShape& input,
                        const OpRegistry& registry = OpRegistry::builtin());

ShapeTrace infer_shapes(const Architecture& arch,
                        const OpRegistry& registry = OpRegistry::builtin());

ValidationReport validate_architecture(const Architecture& arch,
                                       const OpRegistry& registry = OpRegistry::builtin());

/// Parameters of the bottleneck block a residual convolution expands into.
std::uint64_t bottleneck_param_count(std::int64_t in_channels, std::int64_t out_channels,
                                     std::int64_t stride);
std::int64_t bottleneck_width(std::int64_t out_channels);

std::uint64_t layer_param_count(const Layer& layer,
                                const OpRegistry& registry = OpRegistry::builtin());
std::uint64_t param_count(const Architecture& arch,
                          const OpRegistry& registry = OpRegistry::builtin());

/// Lowercase hex SHA-256 of the canonical serialization without the name.
std::string canonical_hash(const Architecture& arch);

}  // namespace chainnas
