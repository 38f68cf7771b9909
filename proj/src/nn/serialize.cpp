#include "advspec/serialize.hpp"

#include <array>
#include <bit>
#include <fstream>

namespace advspec {

namespace {

LayerKind parse_kind(const std::string& s) {
  for (auto k : {LayerKind::dense, LayerKind::reshape, LayerKind::conv1d,
                 LayerKind::conv1d_transpose, LayerKind::activation, LayerKind::max_pool1d}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown layer kind '" + s + "'");
}

}  // namespace

Json to_json(const LayerSpec& s) {
  Json j;
  j["kind"] = to_string(s.kind);
  switch (s.kind) {
    case LayerKind::dense:
      j["units"] = s.units;
      j["init"] = s.init == InitScheme::zeros ? "zeros" : "he_uniform";
      break;
    case LayerKind::reshape:
      j["shape"] = s.target_shape;
      break;
    case LayerKind::conv1d:
    case LayerKind::conv1d_transpose:
      j["out_channels"] = s.out_channels;
      j["out_length"] = s.out_length;
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["pad"] = s.pad;
      if (s.kind == LayerKind::conv1d_transpose) j["out_pad"] = s.out_pad;
      j["init"] = s.init == InitScheme::zeros ? "zeros" : "he_uniform";
      break;
    case LayerKind::activation:
      j["activation"] = to_string(s.activation);
      if (s.activation == Activation::leaky_relu) j["slope"] = s.slope;
      break;
    case LayerKind::max_pool1d:
      j["window"] = s.window;
      break;
  }
  return j;
}

LayerSpec layer_spec_from_json(const Json& j) {
  LayerSpec s;
  s.kind = parse_kind(j.at("kind").get<std::string>());
  read_optional(j, "units", s.units);
  read_optional(j, "shape", s.target_shape);
  read_optional(j, "out_channels", s.out_channels);
  read_optional(j, "out_length", s.out_length);
  read_optional(j, "kernel", s.kernel);
  read_optional(j, "stride", s.stride);
  read_optional(j, "pad", s.pad);
  read_optional(j, "out_pad", s.out_pad);
  read_optional(j, "slope", s.slope);
  read_optional(j, "window", s.window);
  if (j.contains("activation")) s.activation = parse_activation(j.at("activation").get<std::string>());
  if (j.contains("init")) {
    const auto init = j.at("init").get<std::string>();
    if (init == "zeros") {
      s.init = InitScheme::zeros;
    } else if (init == "he_uniform") {
      s.init = InitScheme::he_uniform;
    } else {
      throw std::invalid_argument("unknown init scheme '" + init + "'");
    }
  }
  return s;
}

Json to_json(const ModelConfig& c) {
  Json j;
  j["name"] = c.name;
  j["input_shape"] = c.input_shape;
  j["output_shape"] = c.output_shape;
  j["seed"] = c.seed;
  j["init"] = "he_uniform";
  j["layers"] = Json::array();
  for (const auto& l : c.layers) j["layers"].push_back(to_json(l));
  return j;
}

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  read_optional(j, "name", c.name);
  c.input_shape = j.at("input_shape").get<Shape>();
  read_optional(j, "output_shape", c.output_shape);
  read_optional(j, "seed", c.seed);
  for (const auto& l : j.at("layers")) c.layers.push_back(layer_spec_from_json(l));
  return c;
}

Json to_json(const AdamOptions& o) {
  return Json{{"learning_rate", o.learning_rate},
              {"beta1", o.beta1},
              {"beta2", o.beta2},
              {"epsilon", o.epsilon}};
}

AdamOptions adam_options_from_json(const Json& j) {
  AdamOptions o;
  read_optional(j, "learning_rate", o.learning_rate);
  read_optional(j, "beta1", o.beta1);
  read_optional(j, "beta2", o.beta2);
  read_optional(j, "epsilon", o.epsilon);
  return o;
}

Json to_json(const AdamState& s) {
  return Json{{"options", to_json(s.options)},
              {"step", s.step},
              {"first_moment", s.first_moment},
              {"second_moment", s.second_moment}};
}

AdamState adam_state_from_json(const Json& j) {
  AdamState s;
  s.options = adam_options_from_json(j.at("options"));
  s.step = j.at("step").get<std::uint64_t>();
  s.first_moment = j.at("first_moment").get<std::vector<std::vector<double>>>();
  s.second_moment = j.at("second_moment").get<std::vector<std::vector<double>>>();
  return s;
}

namespace {

constexpr std::array<char, 4> kMagic = {'A', 'D', 'V', 'S'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  auto bits = std::bit_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) out.put(static_cast<char>((bits >> (8 * b)) & 0xff));
}

template <class T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw std::runtime_error("truncated model file");
    bits |= static_cast<U>(static_cast<unsigned char>(c)) << (8 * b);
  }
  return std::bit_cast<T>(bits);
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p.replace_extension(".json");
  return p;
}

}  // namespace

void write_parameters(std::ostream& out, const Model& model) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  const auto layers = static_cast<std::uint32_t>(model.config().layers.size());
  put_le<std::uint32_t>(out, layers);
  for (std::uint32_t i = 0; i < layers; ++i) {
    auto params = model.layer_parameters(i);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.dim()));
      for (auto d : p.shape()) put_le<std::uint64_t>(out, d);
    }
  }
  for (const auto& p : model.parameters()) {
    for (double v : p.data()) put_le<double>(out, v);
  }
}

void read_parameters(std::istream& in, Model& model) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw std::runtime_error("not an ADVS model file");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kVersion) {
    throw std::runtime_error("unsupported model file version " + std::to_string(version));
  }
  const auto layers = get_le<std::uint32_t>(in);
  if (layers != model.config().layers.size()) {
    throw std::runtime_error("model file has " + std::to_string(layers) + " layers, config has " +
                             std::to_string(model.config().layers.size()));
  }
  for (std::uint32_t i = 0; i < layers; ++i) {
    auto params = model.layer_parameters(i);
    const auto count = get_le<std::uint32_t>(in);
    if (count != params.size()) {
      throw std::runtime_error("layer " + std::to_string(i) + " parameter count mismatch");
    }
    for (const auto& p : params) {
      const auto rank = get_le<std::uint32_t>(in);
      Shape shape(rank);
      for (auto& d : shape) d = get_le<std::uint64_t>(in);
      if (shape != p.shape()) {
        throw std::runtime_error("layer " + std::to_string(i) + " parameter shape " +
                                 shape_str(shape) + " does not match config " +
                                 shape_str(p.shape()));
      }
    }
  }
  for (auto& p : model.parameters()) {
    for (double& v : p.mutable_data()) v = get_le<double>(in);
  }
}

void save_model(const Model& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_parameters(out, model);
  }
  std::ofstream side(sidecar_path(path));
  if (!side) throw std::runtime_error("cannot write " + sidecar_path(path).string());
  side << to_json(model.config()).dump(2) << '\n';
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream side(sidecar_path(path));
  if (!side) throw std::runtime_error("missing model config " + sidecar_path(path).string());
  Model model(model_config_from_json(Json::parse(side)));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing model file " + path.string());
  read_parameters(in, model);
  return model;
}

}  // namespace advspec
