#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "nots/tape.hpp"

namespace nots {

class Rng;

// All learnable parameters, keyed by name, partitioned into frozen and
// trainable sets. Iteration order is the registration order so training is
// deterministic.
class ModelState {
 public:
  Array& add(const std::string& name, Array init);
  bool has(const std::string& name) const { return params_.count(name) != 0; }
  Array& at(const std::string& name);
  const Array& at(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }

  void freeze(const std::string& name) { frozen_.insert(name); }
  void freeze_all();
  void unfreeze(const std::string& name) { frozen_.erase(name); }
  bool is_frozen(const std::string& name) const { return frozen_.count(name) != 0; }

  std::size_t total_params() const;
  std::size_t trainable_params() const;
  std::size_t frozen_params() const { return total_params() - trainable_params(); }

  void save(const std::string& path) const;
  static ModelState load(const std::string& path);

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Array> params_;
  std::set<std::string> frozen_;
};

// Binds ModelState parameters onto one tape. Each parameter is registered
// at most once per tape; the id->name table maps exported gradients back.
class ParamContext {
 public:
  ParamContext(Tape& tape, const ModelState& state) : tape_(tape), state_(state) {}

  VarId operator[](const std::string& name);
  const std::vector<std::string>& bound_names() const { return names_; }
  Tape& tape() { return tape_; }

  // Translates backward()'s id-keyed gradients to name-keyed.
  std::map<std::string, Array> name_grads(const std::unordered_map<int, Array>& grads) const;

 private:
  Tape& tape_;
  const ModelState& state_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, VarId> bound_;
};

// Centered uniform scaled by 1/sqrt(fan_in).
Array uniform_init(std::vector<int> shape, int fan_in, Rng& rng);

}  // namespace nots
