#pragma once

// Text fixtures for tensors, layers and cores.
//
// A tensor fixture is one JSON document:
//
//   { "layout": "CHW", "dims": [c, h, w], "dtype": "fp32",
//     "data": [ ... ] }                       // explicit values, or
//   { "layout": "CiKyKxCo", "dims": [...], "dtype": "int8", "seed": 7 }
//
// `data` entries are numbers or strings; strings are parsed with strtod and
// base prefix detection so hex floats ("0x1.8p+1") and hex integers ("0x7f")
// are accepted. When `seed` is given instead of `data`, values come from
// SplitMix64 seeded with that value, drawn in storage order:
//   fp32:  (z >> 40) * 2^-23 - 1        (uniform on [-1, 1), exact in fp32)
//   int8:  (int8_t)(z >> 56)            (full -128..127 range)

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "json.hpp"
#include "pe1d/tensor.hpp"

namespace pe1d {

using json = nlohmann::json;

/// SplitMix64 (Steele, Lea, Flood). Used for every deterministic fill.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) { return next() % bound; }

 private:
  std::uint64_t state_;
};

template <class T>
T random_value(SplitMix64& rng) {
  const auto z = rng.next();
  if constexpr (std::is_same_v<T, float>) {
    return static_cast<float>(z >> 40) * 0x1p-23f - 1.0f;
  } else if constexpr (std::is_same_v<T, std::int8_t>) {
    return static_cast<std::int8_t>(static_cast<std::uint8_t>(z >> 56));
  } else {
    static_assert(std::is_integral_v<T>);
    return static_cast<T>(z);
  }
}

template <class Container>
void fill_random(Container& c, std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (auto& v : c.data()) v = random_value<typename Container::value_type>(rng);
}

template <class T>
constexpr std::string_view dtype_name() {
  if constexpr (std::is_same_v<T, float>) return "fp32";
  else if constexpr (std::is_same_v<T, std::int8_t>) return "int8";
  else if constexpr (std::is_same_v<T, std::int32_t>) return "int32";
  else static_assert(!sizeof(T*), "unsupported fixture dtype");
}

inline FeatureLayout parse_feature_layout(const std::string& s) {
  if (s == "CHW") return FeatureLayout::CHW;
  if (s == "WHC") return FeatureLayout::WHC;
  throw std::invalid_argument("unknown feature layout '" + s + "'");
}

inline WeightLayout parse_weight_layout(const std::string& s) {
  if (s == "KyKxCiCo") return WeightLayout::KyKxCiCo;
  if (s == "CiKyKxCo") return WeightLayout::CiKyKxCo;
  throw std::invalid_argument("unknown weight layout '" + s + "'");
}

namespace detail {

template <class T>
T parse_scalar(const json& v) {
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    char* end = nullptr;
    if constexpr (std::is_floating_point_v<T>) {
      const double d = std::strtod(s.c_str(), &end);
      if (end == s.c_str() || *end != '\0') throw std::invalid_argument("bad number '" + s + "'");
      return static_cast<T>(d);
    } else {
      const long long i = std::strtoll(s.c_str(), &end, 0);
      if (end == s.c_str() || *end != '\0') throw std::invalid_argument("bad number '" + s + "'");
      return static_cast<T>(i);
    }
  }
  if constexpr (std::is_floating_point_v<T>) return static_cast<T>(v.get<double>());
  else return static_cast<T>(v.get<long long>());
}

template <class T, class Dims>
std::vector<T> read_values(const json& j, const Dims& dims) {
  const auto n = volume(dims);
  std::vector<T> out(n);
  if (auto it = j.find("data"); it != j.end()) {
    if (!it->is_array() || it->size() != n)
      throw ShapeError("fixture data length does not match dims");
    for (std::size_t i = 0; i < n; ++i) out[i] = parse_scalar<T>((*it)[i]);
  } else if (auto s = j.find("seed"); s != j.end()) {
    SplitMix64 rng(s->get<std::uint64_t>());
    for (auto& v : out) v = random_value<T>(rng);
  } else {
    throw std::invalid_argument("tensor fixture needs either 'data' or 'seed'");
  }
  return out;
}

template <class T>
void check_dtype(const json& j) {
  if (auto it = j.find("dtype"); it != j.end() && it->get<std::string>() != dtype_name<T>())
    throw std::invalid_argument("fixture dtype '" + it->get<std::string>() + "' but expected '" +
                                std::string(dtype_name<T>()) + "'");
}

}  // namespace detail

template <class T>
Tensor3<T> tensor3_from_json(const json& j) {
  detail::check_dtype<T>(j);
  const auto layout = parse_feature_layout(j.at("layout").get<std::string>());
  const auto dims = j.at("dims").get<std::array<std::size_t, 3>>();
  return Tensor3<T>(layout, dims, detail::read_values<T>(j, dims));
}

template <class T>
Tensor4<T> tensor4_from_json(const json& j) {
  detail::check_dtype<T>(j);
  const auto layout = parse_weight_layout(j.at("layout").get<std::string>());
  const auto dims = j.at("dims").get<std::array<std::size_t, 4>>();
  return Tensor4<T>(layout, dims, detail::read_values<T>(j, dims));
}

template <class Tensor>
json tensor_to_json(const Tensor& t) {
  using T = typename Tensor::value_type;
  json j;
  j["layout"] = std::string(to_string(t.layout()));
  j["dims"] = t.dims();
  j["dtype"] = std::string(dtype_name<T>());
  if constexpr (std::is_same_v<T, std::int8_t>) {
    json arr = json::array();
    for (auto v : t.data()) arr.push_back(static_cast<int>(v));
    j["data"] = std::move(arr);
  } else {
    j["data"] = t.data();
  }
  return j;
}

inline ConvLayerSpec layer_from_json(const json& j) {
  ConvLayerSpec s;
  s.c_in = j.at("c_in").get<std::size_t>();
  s.c_out = j.at("c_out").get<std::size_t>();
  s.h_in = j.at("h_in").get<std::size_t>();
  s.w_in = j.at("w_in").get<std::size_t>();
  s.k_y = j.value("k_y", std::size_t{1});
  s.k_x = j.value("k_x", s.k_y);
  s.stride = j.value("stride", std::size_t{1});
  s.pad = j.value("pad", std::size_t{0});
  s.precision = parse_precision(j.value("precision", std::string("fp32")));
  s.validate();
  return s;
}

inline json layer_to_json(const ConvLayerSpec& s) {
  return json{{"c_in", s.c_in},   {"c_out", s.c_out}, {"h_in", s.h_in},
              {"w_in", s.w_in},   {"k_y", s.k_y},     {"k_x", s.k_x},
              {"stride", s.stride}, {"pad", s.pad},   {"precision", std::string(to_string(s.precision))}};
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return json::parse(in);
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace pe1d
