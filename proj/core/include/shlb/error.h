#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shlb {

// Base for every error the library throws. The CLI prints what() on one line.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ShapeError : public Error {
 public:
  ShapeError(std::string layer, const std::string& detail)
      : Error(layer.empty() ? "shape mismatch: " + detail
                            : "shape mismatch at layer '" + layer + "': " + detail),
        layer_(std::move(layer)),
        detail_(detail) {}

  const std::string& layer() const { return layer_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string layer_;
  std::string detail_;
};

// Raised when backward is requested without a matching forward pass.
class TapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& detail)
      : Error(source + ":" + std::to_string(line) + ": " + detail),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Precondition violations on public operations (empty inputs, bad indices, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace shlb
