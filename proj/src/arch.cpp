#include "chainnas/arch.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"

namespace chainnas {

using json = nlohmann::json;

namespace {

constexpr std::array<std::pair<OpKind, std::string_view>, 8> kKindNames{{
    {OpKind::Conv, "conv"},
    {OpKind::BatchNorm, "batchnorm"},
    {OpKind::Elementwise, "elementwise"},
    {OpKind::Pool, "pool"},
    {OpKind::AdaptivePool, "adaptive_pool"},
    {OpKind::Linear, "linear"},
    {OpKind::Flatten, "flatten"},
    {OpKind::ChannelShuffle, "channel_shuffle"},
}};

OpRegistry make_builtin()
{
    OpRegistry r;
    r.add({OpType("CONV2D"), OpKind::Conv,
           {"bias", "groups", "in_channels", "kernel_size", "out_channels", "padding", "stride"}, {}});
    r.add({OpType("BATCHNORM2D"), OpKind::BatchNorm, {"num_features"}, {}});
    r.add({OpType("RELU"), OpKind::Elementwise, {}, {}});
    r.add({OpType("RELU6"), OpKind::Elementwise, {}, {}});
    r.add({OpType("DROPOUT"), OpKind::Elementwise, {}, {"dropout_p"}});
    r.add({OpType("MAXPOOL2D"), OpKind::Pool, {"kernel_size", "padding", "stride"}, {}});
    r.add({OpType("AVGPOOL2D"), OpKind::Pool, {"kernel_size", "padding", "stride"}, {}});
    r.add({OpType("ADAPTIVEAVGPOOL2D"), OpKind::AdaptivePool, {"output_size"}, {}});
    r.add({OpType("LINEAR"), OpKind::Linear, {"in_features", "out_features"}, {}});
    r.add({OpType("FLATTEN"), OpKind::Flatten, {}, {}});
    r.add({OpType("CHANNELSHUFFLE"), OpKind::ChannelShuffle, {"groups"}, {}});
    return r;
}

std::int64_t conv_side(std::int64_t side, std::int64_t kernel, std::int64_t stride,
                       std::int64_t padding)
{
    const std::int64_t span = side + 2 * padding - kernel;
    if (span < 0)
        return 0;
    return span / stride + 1;
}

std::string layer_tag(std::size_t index, const Layer& layer)
{
    return "layer " + std::to_string(index) + " (" + layer.op.name() + ")";
}

void check_components(const Layer& layer, const OpSpec& spec, std::size_t index,
                      std::vector<Violation>& out)
{
    auto is_known = [&](const std::string& key) {
        return std::find(spec.integer_keys.begin(), spec.integer_keys.end(), key) !=
                   spec.integer_keys.end() ||
               std::find(spec.real_keys.begin(), spec.real_keys.end(), key) != spec.real_keys.end();
    };
    for (const auto& [key, value] : layer.components) {
        if (!is_known(key))
            out.push_back({ViolationKind::UnexpectedComponent, index,
                           layer_tag(index, layer) + ": unexpected component '" + key + "'"});
    }
    for (const auto& key : spec.integer_keys) {
        auto it = layer.components.find(key);
        if (it == layer.components.end()) {
            out.push_back({ViolationKind::MissingComponent, index,
                           layer_tag(index, layer) + ": missing component '" + key + "'"});
            continue;
        }
        const double v = it->second;
        bool valid = std::isfinite(v) && v == std::floor(v);
        if (valid) {
            if (key == "padding")
                valid = v >= 0;
            else if (key == "bias")
                valid = v == 0 || v == 1;
            else
                valid = v >= 1;
        }
        if (!valid) {
            std::ostringstream msg;
            msg << layer_tag(index, layer) << ": invalid " << key << " = " << v;
            out.push_back({ViolationKind::InvalidComponent, index, msg.str()});
        }
    }
    for (const auto& key : spec.real_keys) {
        auto it = layer.components.find(key);
        if (it == layer.components.end()) {
            out.push_back({ViolationKind::MissingComponent, index,
                           layer_tag(index, layer) + ": missing component '" + key + "'"});
            continue;
        }
        const double v = it->second;
        const bool valid = std::isfinite(v) && (key != "dropout_p" || (v >= 0.0 && v <= 1.0));
        if (!valid) {
            std::ostringstream msg;
            msg << layer_tag(index, layer) << ": invalid " << key << " = " << v;
            out.push_back({ViolationKind::InvalidComponent, index, msg.str()});
        }
    }
}

// Layer-local invariants: registry membership, components, residual flag.
void check_layer(const Layer& layer, std::size_t index, const OpRegistry& registry,
                 std::vector<Violation>& out)
{
    if (layer.op.is_virtual()) {
        out.push_back({ViolationKind::VirtualOpInLayers, index,
                       layer_tag(index, layer) + ": virtual state used as a layer"});
        return;
    }
    const OpSpec* spec = registry.find(layer.op.name());
    if (spec == nullptr) {
        out.push_back({ViolationKind::UnknownOp, index, layer_tag(index, layer) + ": unknown operation"});
        return;
    }
    check_components(layer, *spec, index, out);
    if (layer.is_residual_block && spec->kind != OpKind::Conv)
        out.push_back({ViolationKind::ResidualNotConv, index,
                       layer_tag(index, layer) + ": residual flag on a non-convolution"});
}

// Best-effort output shape used to keep validating after a shape error.
TensorShape fallback_shape(const Layer& layer, const OpSpec& spec, const TensorShape& in)
{
    auto side = [&](std::int64_t s) {
        return std::max<std::int64_t>(1, conv_side(s, layer.get("kernel_size"), layer.get("stride"),
                                                   layer.get("padding")));
    };
    switch (spec.kind) {
    case OpKind::Conv:
        return TensorShape::spatial(layer.get("out_channels"), side(in.height), side(in.width));
    case OpKind::BatchNorm:
        return TensorShape::spatial(layer.get("num_features"), in.height, in.width);
    case OpKind::Pool:
        return TensorShape::spatial(in.channels, side(in.height), side(in.width));
    case OpKind::AdaptivePool:
        return TensorShape::spatial(in.channels, layer.get("output_size"), layer.get("output_size"));
    case OpKind::Linear:
        return TensorShape::flat(layer.get("out_features"));
    case OpKind::Flatten:
        return TensorShape::flat(in.elements());
    case OpKind::Elementwise:
    case OpKind::ChannelShuffle:
        break;
    }
    return in;
}

json components_to_json(const Layer& layer, const OpRegistry& registry)
{
    const OpSpec* spec = registry.find(layer.op.name());
    json out = json::object();
    for (const auto& [key, value] : layer.components) {
        const bool real = spec != nullptr && std::find(spec->real_keys.begin(), spec->real_keys.end(),
                                                       key) != spec->real_keys.end();
        if (real || value != std::floor(value))
            out[key] = value;
        else
            out[key] = static_cast<std::int64_t>(value);
    }
    return out;
}

json architecture_to_json(const Architecture& arch, bool include_name)
{
    const OpRegistry& registry = OpRegistry::builtin();
    json doc = json::object();
    if (include_name)
        doc["name"] = arch.name;
    if (arch.input_shape.is_flat())
        doc["input_shape"] = {arch.input_shape.channels};
    else
        doc["input_shape"] = {arch.input_shape.channels, arch.input_shape.height, arch.input_shape.width};
    doc["num_classes"] = arch.num_classes;
    json layers = json::array();
    for (const auto& layer : arch.layers) {
        json l = json::object();
        l["op"] = layer.op.name();
        l["components"] = components_to_json(layer, registry);
        if (layer.is_residual_block)
            l["residual_block"] = true;
        layers.push_back(std::move(l));
    }
    doc["layers"] = std::move(layers);
    return doc;
}

std::int64_t require_int(const json& value, const std::string& what)
{
    if (!value.is_number_integer())
        throw ParseError(what + " must be an integer");
    return value.get<std::int64_t>();
}

}  // namespace

std::string_view to_string(OpKind kind)
{
    for (const auto& [k, name] : kKindNames)
        if (k == kind)
            return name;
    return "unknown";
}

std::optional<OpKind> op_kind_from_string(std::string_view text)
{
    for (const auto& [k, name] : kKindNames)
        if (name == text)
            return k;
    return std::nullopt;
}

const OpRegistry& OpRegistry::builtin()
{
    static const OpRegistry registry = make_builtin();
    return registry;
}

OpRegistry OpRegistry::from_json(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("registry: ") + e.what());
    }
    if (!doc.contains("operations") || !doc["operations"].is_array())
        throw ParseError("registry: missing 'operations' array");
    OpRegistry r;
    for (const auto& entry : doc["operations"]) {
        if (!entry.contains("name") || !entry["name"].is_string() || !entry.contains("kind"))
            throw ParseError("registry: operation needs 'name' and 'kind'");
        auto kind = op_kind_from_string(entry["kind"].get<std::string>());
        if (!kind)
            throw ParseError("registry: unknown kind '" + entry["kind"].get<std::string>() + "'");
        OpSpec spec{OpType(entry["name"].get<std::string>()), *kind, {}, {}};
        if (spec.type.is_virtual())
            throw ParseError("registry: START and OUTPUT are reserved");
        for (const auto& k : entry.value("integer_keys", json::array()))
            spec.integer_keys.push_back(k.get<std::string>());
        for (const auto& k : entry.value("real_keys", json::array()))
            spec.real_keys.push_back(k.get<std::string>());
        r.add(std::move(spec));
    }
    return r;
}

void OpRegistry::add(OpSpec spec)
{
    std::sort(spec.integer_keys.begin(), spec.integer_keys.end());
    std::sort(spec.real_keys.begin(), spec.real_keys.end());
    auto name = spec.type.name();
    specs_.insert_or_assign(std::move(name), std::move(spec));
}

const OpSpec* OpRegistry::find(std::string_view name) const
{
    auto it = specs_.find(name);
    return it == specs_.end() ? nullptr : &it->second;
}

const OpSpec& OpRegistry::at(const OpType& type) const
{
    const OpSpec* spec = find(type.name());
    if (spec == nullptr)
        throw UnknownOpError(type.name());
    return *spec;
}

std::vector<OpType> OpRegistry::types() const
{
    std::vector<OpType> out;
    out.reserve(specs_.size());
    for (const auto& [name, spec] : specs_)
        out.push_back(spec.type);
    return out;
}

std::string OpRegistry::to_json() const
{
    json ops = json::array();
    for (const auto& [name, spec] : specs_) {
        ops.push_back({{"name", name},
                       {"kind", std::string(to_string(spec.kind))},
                       {"integer_keys", spec.integer_keys},
                       {"real_keys", spec.real_keys}});
    }
    json doc = {{"operations", ops}};
    return doc.dump(2) + "\n";
}

std::int64_t Layer::get(const std::string& key) const
{
    auto it = components.find(key);
    if (it == components.end())
        throw ArchError(ViolationKind::MissingComponent, 0,
                        op.name() + ": missing component '" + key + "'");
    return static_cast<std::int64_t>(it->second);
}

std::string TensorShape::str() const
{
    if (is_flat())
        return "(" + std::to_string(channels) + ")";
    return "(" + std::to_string(channels) + "," + std::to_string(height) + "," + std::to_string(width) + ")";
}

std::string_view to_string(ViolationKind kind)
{
    switch (kind) {
    case ViolationKind::EmptyArchitecture: return "EmptyArchitecture";
    case ViolationKind::InvalidInputShape: return "InvalidInputShape";
    case ViolationKind::UnknownOp: return "UnknownOp";
    case ViolationKind::VirtualOpInLayers: return "VirtualOpInLayers";
    case ViolationKind::MissingComponent: return "MissingComponent";
    case ViolationKind::UnexpectedComponent: return "UnexpectedComponent";
    case ViolationKind::InvalidComponent: return "InvalidComponent";
    case ViolationKind::ResidualNotConv: return "ResidualNotConv";
    case ViolationKind::ChannelMismatch: return "ChannelMismatch";
    case ViolationKind::FeatureMismatch: return "FeatureMismatch";
    case ViolationKind::GroupMismatch: return "GroupMismatch";
    case ViolationKind::SpatialCollapse: return "SpatialCollapse";
    case ViolationKind::RequiresSpatialInput: return "RequiresSpatialInput";
    case ViolationKind::LinearOnSpatialInput: return "LinearOnSpatialInput";
    case ViolationKind::MissingClassifierHead: return "MissingClassifierHead";
    case ViolationKind::ClassCountMismatch: return "ClassCountMismatch";
    }
    return "Unknown";
}

bool ValidationReport::contains(ViolationKind kind) const
{
    return std::any_of(violations.begin(), violations.end(),
                       [kind](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::str() const
{
    std::string out;
    for (const auto& v : violations) {
        out += to_string(v.kind);
        out += ": ";
        out += v.message;
        out += '\n';
    }
    return out;
}

Architecture parse_architecture(std::string_view text, const OpRegistry& registry)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed document: ") + e.what());
    }
    if (!doc.is_object())
        throw ParseError("malformed document: top level must be an object");

    Architecture arch;
    if (doc.contains("name")) {
        if (!doc["name"].is_string())
            throw ParseError("name must be a string");
        arch.name = doc["name"].get<std::string>();
    }
    if (doc.contains("input_shape")) {
        const auto& s = doc["input_shape"];
        if (!s.is_array() || (s.size() != 3 && s.size() != 1))
            throw ParseError("input_shape must be [channels, height, width] or [features]");
        if (s.size() == 3)
            arch.input_shape = TensorShape::spatial(require_int(s[0], "input_shape"),
                                                    require_int(s[1], "input_shape"),
                                                    require_int(s[2], "input_shape"));
        else
            arch.input_shape = TensorShape::flat(require_int(s[0], "input_shape"));
    }
    if (doc.contains("num_classes"))
        arch.num_classes = require_int(doc["num_classes"], "num_classes");
    if (!doc.contains("layers") || !doc["layers"].is_array())
        throw ParseError("malformed document: missing 'layers' array");

    for (const auto& entry : doc["layers"]) {
        if (!entry.is_object() || !entry.contains("op") || !entry["op"].is_string())
            throw ParseError("malformed document: every layer needs a string 'op'");
        const auto op = entry["op"].get<std::string>();
        if (registry.find(op) == nullptr)
            throw UnknownOpError(op);
        Layer layer{OpType(op), {}, false};
        if (entry.contains("components")) {
            const auto& comps = entry["components"];
            if (!comps.is_object())
                throw ParseError("malformed document: components must be an object");
            for (const auto& [key, value] : comps.items()) {
                if (!value.is_number())
                    throw ParseError("component '" + key + "' must be numeric");
                layer.components[key] = value.get<double>();
            }
        }
        if (entry.contains("residual_block")) {
            if (!entry["residual_block"].is_boolean())
                throw ParseError("residual_block must be a boolean");
            layer.is_residual_block = entry["residual_block"].get<bool>();
        }
        arch.layers.push_back(std::move(layer));
    }

    if (arch.layers.empty())
        throw ArchError(ViolationKind::EmptyArchitecture, 0, "architecture has no layers");
    std::vector<Violation> problems;
    for (std::size_t i = 0; i < arch.layers.size(); ++i)
        check_layer(arch.layers[i], i, registry, problems);
    if (!problems.empty())
        throw ArchError(problems.front().kind, problems.front().layer, problems.front().message);
    return arch;
}

Architecture load_architecture(const std::string& path, const OpRegistry& registry)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_architecture(buf.str(), registry);
}

std::string serialize_architecture(const Architecture& arch)
{
    return architecture_to_json(arch, true).dump(2) + "\n";
}

TensorShape apply_layer(const Layer& layer, const TensorShape& in, const OpRegistry& registry)
{
    const OpSpec& spec = registry.at(layer.op);
    auto fail = [&](ViolationKind kind, const std::string& detail) -> ArchError {
        return ArchError(kind, 0, layer.op.name() + " on " + in.str() + ": " + detail);
    };
    auto need_spatial = [&] {
        if (in.is_flat())
            throw fail(ViolationKind::RequiresSpatialInput, "needs a (channels, height, width) input");
    };

    switch (spec.kind) {
    case OpKind::Conv: {
        need_spatial();
        const auto cin = layer.get("in_channels");
        const auto cout = layer.get("out_channels");
        if (cin != in.channels)
            throw fail(ViolationKind::ChannelMismatch,
                       "in_channels " + std::to_string(cin) + " != " + std::to_string(in.channels));
        std::int64_t h = 0;
        std::int64_t w = 0;
        if (layer.is_residual_block) {
            // 3x3/pad-1 body and 1x1 projection agree on the output size
            const auto stride = layer.get("stride");
            h = conv_side(in.height, 3, stride, 1);
            w = conv_side(in.width, 3, stride, 1);
        } else {
            const auto groups = layer.get("groups");
            if (cin % groups != 0 || cout % groups != 0)
                throw fail(ViolationKind::GroupMismatch,
                           "groups " + std::to_string(groups) + " must divide in/out channels");
            h = conv_side(in.height, layer.get("kernel_size"), layer.get("stride"), layer.get("padding"));
            w = conv_side(in.width, layer.get("kernel_size"), layer.get("stride"), layer.get("padding"));
        }
        if (h < 1 || w < 1)
            throw fail(ViolationKind::SpatialCollapse, "output side below 1");
        return TensorShape::spatial(cout, h, w);
    }
    case OpKind::BatchNorm:
        need_spatial();
        if (layer.get("num_features") != in.channels)
            throw fail(ViolationKind::ChannelMismatch,
                       "num_features " + std::to_string(layer.get("num_features")) + " != " +
                           std::to_string(in.channels));
        return in;
    case OpKind::Elementwise:
        return in;
    case OpKind::Pool: {
        need_spatial();
        const auto k = layer.get("kernel_size");
        const auto p = layer.get("padding");
        if (2 * p > k)
            throw fail(ViolationKind::InvalidComponent, "padding exceeds half the kernel");
        const auto h = conv_side(in.height, k, layer.get("stride"), p);
        const auto w = conv_side(in.width, k, layer.get("stride"), p);
        if (h < 1 || w < 1)
            throw fail(ViolationKind::SpatialCollapse, "output side below 1");
        return TensorShape::spatial(in.channels, h, w);
    }
    case OpKind::AdaptivePool:
        need_spatial();
        return TensorShape::spatial(in.channels, layer.get("output_size"), layer.get("output_size"));
    case OpKind::Linear:
        if (!in.is_flat())
            throw fail(ViolationKind::LinearOnSpatialInput, "input must be flattened first");
        if (layer.get("in_features") != in.features())
            throw fail(ViolationKind::FeatureMismatch,
                       "in_features " + std::to_string(layer.get("in_features")) + " != " +
                           std::to_string(in.features()));
        return TensorShape::flat(layer.get("out_features"));
    case OpKind::Flatten:
        return TensorShape::flat(in.elements());
    case OpKind::ChannelShuffle:
        need_spatial();
        if (in.channels % layer.get("groups") != 0)
            throw fail(ViolationKind::GroupMismatch, "groups must divide channels");
        return in;
    }
    return in;
}

ShapeTrace infer_shapes(const Architecture& arch, const OpRegistry& registry)
{
    ShapeTrace trace;
    trace.reserve(arch.layers.size());
    TensorShape shape = arch.input_shape;
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        try {
            shape = apply_layer(arch.layers[i], shape, registry);
        } catch (const ArchError& e) {
            throw ArchError(e.kind(), i, "layer " + std::to_string(i) + ": " + e.what());
        }
        trace.push_back(shape);
    }
    return trace;
}

ValidationReport validate_architecture(const Architecture& arch, const OpRegistry& registry)
{
    ValidationReport report;
    auto& out = report.violations;
    const std::size_t whole = arch.layers.size();

    const auto& s = arch.input_shape;
    if (s.channels < 1 || (!s.is_flat() && (s.height < 1 || s.width < 1)))
        out.push_back({ViolationKind::InvalidInputShape, whole, "input shape " + s.str() + " is invalid"});
    if (arch.num_classes < 1)
        out.push_back({ViolationKind::ClassCountMismatch, whole, "num_classes must be positive"});
    if (arch.layers.empty()) {
        out.push_back({ViolationKind::EmptyArchitecture, whole, "architecture has no layers"});
        return report;
    }

    TensorShape shape = arch.input_shape;
    bool shape_known = out.empty();
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const Layer& layer = arch.layers[i];
        const std::size_t before = out.size();
        check_layer(layer, i, registry, out);
        if (out.size() != before) {
            // components are unusable; later shape checks would only cascade
            shape_known = false;
            continue;
        }
        if (!shape_known)
            continue;
        try {
            shape = apply_layer(layer, shape, registry);
        } catch (const ArchError& e) {
            out.push_back({e.kind(), i, "layer " + std::to_string(i) + ": " + e.what()});
            shape = fallback_shape(layer, registry.at(layer.op), shape);
        }
    }

    const Layer& last = arch.layers.back();
    const OpSpec* spec = registry.find(last.op.name());
    if (spec == nullptr || spec->kind != OpKind::Linear) {
        out.push_back({ViolationKind::MissingClassifierHead, whole,
                       "last layer is " + last.op.name() + ", expected a linear classifier head"});
    } else if (last.components.count("out_features") != 0 && last.get("out_features") != arch.num_classes) {
        out.push_back({ViolationKind::ClassCountMismatch, whole,
                       "classifier emits " + std::to_string(last.get("out_features")) + " classes, expected " +
                           std::to_string(arch.num_classes)});
    }
    return report;
}

std::int64_t bottleneck_width(std::int64_t out_channels)
{
    return std::max<std::int64_t>(1, out_channels / 4);
}

std::uint64_t bottleneck_param_count(std::int64_t in_channels, std::int64_t out_channels,
                                     std::int64_t stride)
{
    const auto width = static_cast<std::uint64_t>(bottleneck_width(out_channels));
    const auto cin = static_cast<std::uint64_t>(in_channels);
    const auto cout = static_cast<std::uint64_t>(out_channels);
    std::uint64_t total = cin * width + 2 * width     // 1x1 reduce + norm
                          + width * width * 9 + 2 * width  // 3x3 + norm
                          + width * cout + 2 * cout;       // 1x1 restore + norm
    if (in_channels != out_channels || stride != 1)
        total += cin * cout + 2 * cout;  // projection skip + norm
    return total;
}

std::uint64_t layer_param_count(const Layer& layer, const OpRegistry& registry)
{
    switch (registry.at(layer.op).kind) {
    case OpKind::Conv: {
        if (layer.is_residual_block)
            return bottleneck_param_count(layer.get("in_channels"), layer.get("out_channels"),
                                          layer.get("stride"));
        const auto cin = static_cast<std::uint64_t>(layer.get("in_channels"));
        const auto cout = static_cast<std::uint64_t>(layer.get("out_channels"));
        const auto k = static_cast<std::uint64_t>(layer.get("kernel_size"));
        const auto groups = static_cast<std::uint64_t>(layer.get("groups"));
        return cin * cout * k * k / groups + (layer.get("bias") != 0 ? cout : 0);
    }
    case OpKind::BatchNorm:
        return 2 * static_cast<std::uint64_t>(layer.get("num_features"));
    case OpKind::Linear: {
        const auto fin = static_cast<std::uint64_t>(layer.get("in_features"));
        const auto fout = static_cast<std::uint64_t>(layer.get("out_features"));
        return fin * fout + fout;
    }
    default:
        return 0;
    }
}

std::uint64_t param_count(const Architecture& arch, const OpRegistry& registry)
{
    std::uint64_t total = 0;
    for (const auto& layer : arch.layers)
        total += layer_param_count(layer, registry);
    return total;
}

std::string canonical_hash(const Architecture& arch)
{
    const std::string text = architecture_to_json(arch, false).dump();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

}  // namespace chainnas
