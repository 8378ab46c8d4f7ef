#pragma once

#include "retrace/generation.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace retrace::detail {

/// POSTs a JSON body to base_url + path. Throws GenerationError, marked
/// retryable for transport failures and 408/429/5xx.
nlohmann::json post_json(const EndpointConfig& endpoint, const std::string& path, const nlohmann::json& body);

}  // namespace retrace::detail
