#include "nots/model.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

#include "nots/rng.hpp"

namespace nots {

Array& ModelState::add(const std::string& name, Array init) {
  auto [it, inserted] = params_.emplace(name, std::move(init));
  if (!inserted) throw std::invalid_argument("ModelState: duplicate parameter '" + name + "'");
  order_.push_back(name);
  return it->second;
}

Array& ModelState::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end())
    throw std::out_of_range("ModelState: no parameter '" + name + "'");
  return it->second;
}

const Array& ModelState::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw std::out_of_range("ModelState: no parameter '" + name + "'");
  return it->second;
}

void ModelState::freeze_all() {
  for (const auto& n : order_) frozen_.insert(n);
}

std::size_t ModelState::total_params() const {
  std::size_t n = 0;
  for (const auto& name : order_) n += params_.at(name).size();
  return n;
}

std::size_t ModelState::trainable_params() const {
  std::size_t n = 0;
  for (const auto& name : order_)
    if (!is_frozen(name)) n += params_.at(name).size();
  return n;
}

namespace {
constexpr std::uint32_t kMagic = 0x4e4f5453;  // "NOTS"
constexpr std::uint32_t kVersion = 1;
}  // namespace

void ModelState::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  auto w32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  w32(kMagic);
  w32(kVersion);
  w32(static_cast<std::uint32_t>(order_.size()));
  for (const auto& name : order_) {
    const Array& a = params_.at(name);
    w32(static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    w32(is_frozen(name) ? 1u : 0u);
    w32(static_cast<std::uint32_t>(a.shape.size()));
    for (int d : a.shape) w32(static_cast<std::uint32_t>(d));
    f.write(reinterpret_cast<const char*>(a.data.data()),
            static_cast<std::streamsize>(a.data.size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

ModelState ModelState::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  auto r32 = [&]() {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  if (r32() != kMagic) throw std::runtime_error("'" + path + "' is not a checkpoint");
  if (r32() != kVersion) throw std::runtime_error("unsupported checkpoint version");
  std::uint32_t count = r32();
  ModelState state;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t nlen = r32();
    std::string name(nlen, '\0');
    f.read(name.data(), nlen);
    bool frozen = r32() != 0;
    std::uint32_t rank = r32();
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(r32());
    Array a(shape);
    f.read(reinterpret_cast<char*>(a.data.data()),
           static_cast<std::streamsize>(a.data.size() * sizeof(double)));
    state.add(name, std::move(a));
    if (frozen) state.freeze(name);
  }
  if (!f) throw std::runtime_error("truncated checkpoint '" + path + "'");
  return state;
}

VarId ParamContext::operator[](const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  int id = static_cast<int>(names_.size());
  VarId v = tape_.param(state_.at(name), id);
  names_.push_back(name);
  bound_.emplace(name, v);
  return v;
}

std::map<std::string, Array> ParamContext::name_grads(
    const std::unordered_map<int, Array>& grads) const {
  std::map<std::string, Array> out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    auto it = grads.find(static_cast<int>(i));
    if (it != grads.end()) out.emplace(names_[i], it->second);
  }
  return out;
}

Array uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
  Array a(std::move(shape));
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
  for (double& v : a.data) v = rng.uniform(-bound, bound);
  return a;
}

}  // namespace nots
