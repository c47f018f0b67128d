#pragma once

#include <stdexcept>
#include <string>

namespace odpp {

/// Base of every library error. The category maps onto a CLI exit code.
class Error : public std::runtime_error {
 public:
  enum class Category { Config, Io, Data, Dimension, Numerical, Geometry };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Category::Config, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Category::Io, what) {}
};

/// Malformed or out-of-domain input data (bad CSV rows, points outside the grid).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(Category::Data, what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(Category::Dimension, what) {}
};

/// Factorization failures, overflow, NaN targets.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(Category::Numerical, what) {}
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& what) : Error(Category::Geometry, what) {}
};

}  // namespace odpp
