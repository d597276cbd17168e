#pragma once

#include <string>

#include <json.hpp>

#include "cropmon/errors.hpp"
#include "cropmon/tensor.hpp"

namespace cropmon {

// {"shape": [...], "data": [...]}; an empty tensor is written as null.
inline nlohmann::json tensor_to_json(const Tensor& t) {
  if (t.empty()) return nullptr;
  return nlohmann::json{{"shape", t.shape()}, {"data", t.storage()}};
}

inline Tensor tensor_from_json(const nlohmann::json& j, const std::string& name) {
  if (j.is_null()) return Tensor();
  try {
    return Tensor(j.at("shape").get<std::vector<std::size_t>>(), j.at("data").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("field '" + name + "': " + e.what());
  }
}

}  // namespace cropmon
