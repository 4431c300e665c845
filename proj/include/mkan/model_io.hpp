#pragma once

// Plain-text model files. Numbers use the shortest round-trip form, so a load
// reproduces the saved model bit for bit.
//
//   MKAN1
//   shape 2 5 1
//   degree 3
//   grid 5
//   grid_eps 1
//   seed 42
//   backend matrix
//   base_function silu
//   layer 0 2 5
//   domains -1 1 -1 1
//   coeffs ...
//   base_weight ...
//   spline_weight ...
//   end

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkan/format.hpp"
#include "mkan/kan.hpp"

namespace mkan {

inline constexpr const char* kModelMagic = "MKAN1";

namespace detail {

inline void write_values(std::ostream& os, const char* key, const std::vector<double>& v) {
  os << key;
  for (double x : v) os << ' ' << format_double(x);
  os << '\n';
}

struct LineReader {
  std::istream& is;
  int line_no = 0;

  std::vector<std::string> next(const char* expected_key) {
    std::string line;
    while (std::getline(is, line)) {
      ++line_no;
      std::istringstream ss(line);
      std::vector<std::string> tokens;
      for (std::string t; ss >> t;) tokens.push_back(t);
      if (tokens.empty()) continue;
      if (tokens.front() != expected_key)
        throw std::invalid_argument("model file line " + std::to_string(line_no) + ": expected '" + expected_key +
                                    "', found '" + tokens.front() + "'");
      return tokens;
    }
    throw std::invalid_argument(std::string("model file truncated before '") + expected_key + "'");
  }

  std::string single(const char* key) {
    auto t = next(key);
    if (t.size() != 2) throw std::invalid_argument(std::string("model file: '") + key + "' takes one value");
    return t[1];
  }

  std::vector<double> values(const char* key, std::size_t count) {
    auto t = next(key);
    if (t.size() != count + 1)
      throw std::invalid_argument("model file line " + std::to_string(line_no) + ": '" + key + "' needs " +
                                  std::to_string(count) + " values");
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t q = 1; q < t.size(); ++q) out.push_back(parse_double(t[q]));
    return out;
  }
};

}  // namespace detail

inline void save_model(const Model& model, std::ostream& os) {
  const auto& s = model.spec;
  os << kModelMagic << '\n';
  os << "shape";
  for (int w : s.shape) os << ' ' << w;
  os << '\n';
  os << "degree " << s.degree << '\n'
     << "grid " << s.grid << '\n'
     << "grid_eps " << format_double(s.grid_eps) << '\n'
     << "seed " << s.seed << '\n'
     << "backend " << to_string(s.backend) << '\n'
     << "base_function " << to_string(s.base_function) << '\n';
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    os << "layer " << l << ' ' << layer.in_dim << ' ' << layer.out_dim << '\n';
    os << "domains";
    for (const auto& g : layer.grids) os << ' ' << format_double(g.lo) << ' ' << format_double(g.hi);
    os << '\n';
    detail::write_values(os, "coeffs", layer.coeffs);
    detail::write_values(os, "base_weight", layer.base_weight);
    detail::write_values(os, "spline_weight", layer.spline_weight);
  }
  os << "end\n";
}

inline Model load_model(std::istream& is) {
  detail::LineReader in{is};
  std::string magic;
  while (magic.empty() && std::getline(is, magic)) {
    ++in.line_no;
    magic = std::string(trim(magic));
  }
  if (magic != kModelMagic) throw std::invalid_argument("not a model file: missing MKAN1 header");

  Model model;
  auto& s = model.spec;
  const auto shape = in.next("shape");
  s.shape.clear();
  for (std::size_t q = 1; q < shape.size(); ++q) s.shape.push_back(static_cast<int>(parse_int(shape[q])));
  s.degree = static_cast<int>(parse_int(in.single("degree")));
  s.grid = static_cast<int>(parse_int(in.single("grid")));
  s.grid_eps = parse_double(in.single("grid_eps"));
  s.seed = static_cast<std::uint64_t>(std::stoull(in.single("seed")));
  s.backend = parse_backend(in.single("backend"));
  s.base_function = parse_base_function(in.single("base_function"));
  s.validate();

  const int nb = s.grid + s.degree;
  for (std::size_t l = 0; l + 1 < s.shape.size(); ++l) {
    const auto head = in.next("layer");
    if (head.size() != 4 || parse_int(head[1]) != static_cast<long long>(l) || parse_int(head[2]) != s.shape[l] ||
        parse_int(head[3]) != s.shape[l + 1])
      throw std::invalid_argument("model file: layer " + std::to_string(l) + " header does not match the shape");
    LayerParams layer;
    layer.in_dim = s.shape[l];
    layer.out_dim = s.shape[l + 1];
    const std::size_t edges = static_cast<std::size_t>(layer.in_dim) * layer.out_dim;
    const auto dom = in.values("domains", 2 * static_cast<std::size_t>(layer.in_dim));
    for (int i = 0; i < layer.in_dim; ++i)
      layer.grids.push_back(make_uniform_grid(s.degree, s.grid, dom[2 * i], dom[2 * i + 1]));
    layer.coeffs = in.values("coeffs", edges * nb);
    layer.base_weight = in.values("base_weight", edges);
    layer.spline_weight = in.values("spline_weight", edges);
    layer.validate();
    model.layers.push_back(std::move(layer));
  }
  in.next("end");
  return model;
}

inline void save_model(const Model& model, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write model file '" + path + "'");
  save_model(model, os);
  if (!os) throw std::runtime_error("failed writing model file '" + path + "'");
}

inline Model load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read model file '" + path + "'");
  return load_model(is);
}

}  // namespace mkan
