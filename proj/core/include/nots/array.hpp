#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nots {

// Error thrown when op inputs have incompatible shapes. Message names the
// op kind and the offending dimensions.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense row-major real array. Rank is dynamic; the model only ever uses
// rank 0 (scalars), 1, 2 and 3 (conv weights).
struct Array {
  std::vector<int> shape;
  std::vector<double> data;

  Array() = default;
  explicit Array(std::vector<int> s);
  Array(std::vector<int> s, std::vector<double> d);

  static Array scalar(double v);
  static Array zeros_like(const Array& a);

  std::size_t size() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  bool is_scalar() const { return shape.empty(); }

  // 2-D accessors.
  int rows() const;
  int cols() const;
  double& at(int i, int j);
  double at(int i, int j) const;

  double item() const;  // scalar value; throws if not scalar
  bool all_finite() const;
  bool same_shape(const Array& o) const { return shape == o.shape; }
};

std::string shape_str(const std::vector<int>& s);
std::size_t shape_numel(const std::vector<int>& s);

}  // namespace nots
