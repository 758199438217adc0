#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

namespace edgeoff {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads optional fields out of a JSON object section and remembers which
/// keys were consumed, so that leftovers can be reported as unknown keys.
/// Error messages carry the dotted path of the offending field.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& object, std::string path)
      : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) {
      throw ConfigError(path_ + ": expected a JSON object");
    }
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = object_.find(key);
    if (it == object_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(field(key) + ": " + e.what());
    }
  }

  /// Returns the sub-object for `key`, or an empty object when absent.
  const nlohmann::json& section(const char* key) {
    seen_.insert(key);
    auto it = object_.find(key);
    if (it == object_.end()) return empty_object();
    return *it;
  }

  bool has(const char* key) const { return object_.contains(key); }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  /// Throws if the object contains any key that was never read.
  void finish() const {
    for (const auto& item : object_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError(field(item.key()) + ": unknown key");
      }
    }
  }

 private:
  static const nlohmann::json& empty_object() {
    static const nlohmann::json kEmpty = nlohmann::json::object();
    return kEmpty;
  }

  const nlohmann::json& object_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace edgeoff
