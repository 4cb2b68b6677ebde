#include "nots/array.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace nots {

std::size_t shape_numel(const std::vector<int>& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << ")";
  return os.str();
}

Array::Array(std::vector<int> s) : shape(std::move(s)) {
  data.assign(shape_numel(shape), 0.0);
}

Array::Array(std::vector<int> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape_numel(shape) != data.size())
    throw ShapeError("Array: shape " + shape_str(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
}

Array Array::scalar(double v) {
  Array a;
  a.data = {v};
  return a;
}

Array Array::zeros_like(const Array& a) { return Array(a.shape); }

int Array::rows() const {
  if (rank() != 2) throw ShapeError("rows(): array is not 2-D, shape " + shape_str(shape));
  return shape[0];
}

int Array::cols() const {
  if (rank() != 2) throw ShapeError("cols(): array is not 2-D, shape " + shape_str(shape));
  return shape[1];
}

double& Array::at(int i, int j) {
  return data[static_cast<std::size_t>(i) * shape[1] + j];
}

double Array::at(int i, int j) const {
  return data[static_cast<std::size_t>(i) * shape[1] + j];
}

double Array::item() const {
  if (!is_scalar() && size() != 1)
    throw ShapeError("item(): array of shape " + shape_str(shape) + " is not scalar");
  return data[0];
}

bool Array::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace nots
