#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace gdeform {

/// Grid node index (i along u, j along v, k along the ruling parameter t).
struct Node {
  int i = 0;
  int j = 0;
  int k = 0;
  friend bool operator==(const Node&, const Node&) = default;
};

inline std::string to_string(const Node& n) {
  return "(" + std::to_string(n.i) + "," + std::to_string(n.j) + "," + std::to_string(n.k) + ")";
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A mathematical precondition or invariant failed; `node` names the first offending node when known.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what, std::optional<Node> node = std::nullopt)
      : Error(node ? what + " at node " + to_string(*node) : what), node_(node) {}
  const std::optional<Node>& node() const noexcept { return node_; }

 private:
  std::optional<Node> node_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gdeform
