#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "atbilstm/error.hpp"
#include "atbilstm/nn/network.hpp"
#include "atbilstm/nn/rmsprop.hpp"
#include "atbilstm/text.hpp"

// Text checkpoint, one record per line:
//
//   atbilstm-checkpoint 1
//   variant <lstm|bilstm|at-bilstm>
//   input_size <n> / hidden <n> / dropout_rate <x> / bn_eps <x> / bn_momentum <x>
//   tensor <name> <rank> <dims...> <values...>      (every network tensor)
//   optimizer <rho> <learning_rate> <delta> <steps> (optional, then one
//   tensor rmsprop.r.<k> line per trainable tensor)
//   extra <name> <count> <values...>                (caller-defined vectors)
//   end
//
// Numbers use the shortest round-trip decimal form, so save/load is exact.
namespace atbilstm::nn {

struct Checkpoint {
  NetworkParams params;
  std::optional<RmsPropState> optimizer;
  std::map<std::string, std::vector<double>> extras;
};

namespace detail {

inline void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  out << "tensor " << name << ' ' << t.rank();
  for (auto d : t.shape()) out << ' ' << d;
  for (double v : t.data()) out << ' ' << text::format_double(v);
  out << '\n';
}

inline double read_number(std::istringstream& in) {
  std::string tok;
  if (!(in >> tok)) throw Error("checkpoint: truncated record");
  const auto v = text::parse_double(tok);
  if (!v) throw Error("checkpoint: bad number '" + tok + "'");
  return *v;
}

inline std::size_t read_count(std::istringstream& in) {
  long long v = -1;
  if (!(in >> v) || v < 0) throw Error("checkpoint: bad count");
  return static_cast<std::size_t>(v);
}

inline Tensor read_tensor(std::istringstream& in, std::string& name) {
  if (!(in >> name)) throw Error("checkpoint: tensor without name");
  std::vector<std::size_t> shape(read_count(in));
  for (auto& d : shape) d = read_count(in);
  Tensor t(shape);
  for (double& v : t.data()) v = read_number(in);
  return t;
}

}  // namespace detail

inline void save_checkpoint(std::ostream& out, const Checkpoint& ck) {
  const auto& p = ck.params;
  out << "atbilstm-checkpoint 1\n"
      << "variant " << to_string(p.variant) << '\n'
      << "input_size " << p.input_size << '\n'
      << "hidden " << p.hidden << '\n'
      << "dropout_rate " << text::format_double(p.dropout_rate) << '\n'
      << "bn_eps " << text::format_double(p.bn_eps) << '\n'
      << "bn_momentum " << text::format_double(p.bn_momentum) << '\n';
  p.visit_all([&](const std::string& name, const Tensor& t) { detail::write_tensor(out, name, t); });
  if (ck.optimizer) {
    const auto& o = *ck.optimizer;
    out << "optimizer " << text::format_double(o.rho) << ' ' << text::format_double(o.learning_rate) << ' '
        << text::format_double(o.delta) << ' ' << o.steps << ' ' << o.r.size() << '\n';
    for (std::size_t k = 0; k < o.r.size(); ++k) detail::write_tensor(out, "rmsprop.r." + std::to_string(k), o.r[k]);
  }
  for (const auto& [name, values] : ck.extras) {
    out << "extra " << name << ' ' << values.size();
    for (double v : values) out << ' ' << text::format_double(v);
    out << '\n';
  }
  out << "end\n";
}

inline Checkpoint load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "atbilstm-checkpoint 1") throw Error("checkpoint: unknown header");

  std::optional<Variant> variant;
  std::size_t input = 0, hidden = 0;
  double dropout = 0.0, eps = 1e-5, momentum = 0.9;
  std::map<std::string, Tensor> tensors;
  Checkpoint ck;
  std::size_t optimizer_tensors = 0;
  bool ended = false;

  while (std::getline(in, line)) {
    std::istringstream rec(line);
    std::string key;
    rec >> key;
    if (key == "variant") {
      std::string v;
      rec >> v;
      variant = parse_variant(v);
      if (!variant) throw Error("checkpoint: unknown variant '" + v + "'");
    } else if (key == "input_size") {
      input = detail::read_count(rec);
    } else if (key == "hidden") {
      hidden = detail::read_count(rec);
    } else if (key == "dropout_rate") {
      dropout = detail::read_number(rec);
    } else if (key == "bn_eps") {
      eps = detail::read_number(rec);
    } else if (key == "bn_momentum") {
      momentum = detail::read_number(rec);
    } else if (key == "tensor") {
      std::string name;
      Tensor t = detail::read_tensor(rec, name);
      tensors.emplace(std::move(name), std::move(t));
    } else if (key == "optimizer") {
      RmsPropState o;
      o.rho = detail::read_number(rec);
      o.learning_rate = detail::read_number(rec);
      o.delta = detail::read_number(rec);
      o.steps = detail::read_count(rec);
      optimizer_tensors = detail::read_count(rec);
      ck.optimizer = std::move(o);
    } else if (key == "extra") {
      std::string name;
      rec >> name;
      std::vector<double> values(detail::read_count(rec));
      for (double& v : values) v = detail::read_number(rec);
      ck.extras.emplace(std::move(name), std::move(values));
    } else if (key == "end") {
      ended = true;
      break;
    } else if (!key.empty()) {
      throw Error("checkpoint: unknown record '" + key + "'");
    }
  }
  if (!ended) throw Error("checkpoint: missing end marker");
  if (!variant) throw Error("checkpoint: missing variant");

  ck.params = zero_network(*variant, input, hidden, dropout);
  ck.params.bn_eps = eps;
  ck.params.bn_momentum = momentum;
  ck.params.visit_all([&](const std::string& name, Tensor& t) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("checkpoint: missing tensor " + name);
    if (!it->second.same_shape(t)) throw ShapeMismatch("checkpoint: tensor " + name + " has the wrong shape");
    t = std::move(it->second);
  });
  if (ck.optimizer) {
    for (std::size_t k = 0; k < optimizer_tensors; ++k) {
      auto it = tensors.find("rmsprop.r." + std::to_string(k));
      if (it == tensors.end()) throw Error("checkpoint: missing optimizer accumulator " + std::to_string(k));
      ck.optimizer->r.push_back(std::move(it->second));
    }
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  save_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path.string());
  return load_checkpoint(in);
}

}  // namespace atbilstm::nn
