#include "retrace/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace retrace {

namespace pt = boost::property_tree;
using json = nlohmann::json;

void RunConfig::validate(bool needs_generation, bool needs_embedding) const {
  if (output) {
    for (const auto& in : inputs) {
      auto norm = [](const std::filesystem::path& p) {
        std::error_code ec;
        auto c = std::filesystem::weakly_canonical(std::filesystem::absolute(p), ec);
        return ec ? std::filesystem::absolute(p).lexically_normal() : c;
      };
      const bool same = norm(in) == norm(*output);
      if (same) throw UsageError("output path '" + output->string() + "' is also an input");
    }
  }
  if (needs_generation && generation.provider == "http" && generation.endpoint.api_key_env.empty()) {
    throw UsageError("generation provider needs a credential environment variable name");
  }
  if (needs_embedding && embedding.provider == "http" && embedding.endpoint.api_key_env.empty()) {
    throw UsageError("embedding provider needs a credential environment variable name");
  }
  try {
    eval.validate();
    rewrite.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!(fpr_budget > 0.0 && fpr_budget < 1.0)) throw UsageError("fpr budget must lie in (0, 1)");
}

namespace {

json provider_json(const ProviderSettings& p) {
  return {{"provider", p.provider},
          {"base_url", p.endpoint.base_url},
          {"model", p.endpoint.model},
          {"api_key_env", p.endpoint.api_key_env},
          {"timeout_seconds", p.endpoint.timeout.count()}};
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\''))) {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

template <typename T>
T parse_number(const std::string& section, const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !in.eof()) throw UsageError("config [" + section + "] " + key + ": not a number: '" + value + "'");
  return out;
}

void apply_provider(ProviderSettings& p, const std::string& section, const std::string& key, const std::string& v,
                    bool& handled) {
  handled = true;
  if (key == "provider") {
    p.provider = v;
  } else if (key == "base_url") {
    p.endpoint.base_url = v;
  } else if (key == "model") {
    p.endpoint.model = v;
  } else if (key == "api_key_env") {
    p.endpoint.api_key_env = v;
  } else if (key == "timeout_seconds") {
    p.endpoint.timeout = std::chrono::seconds(parse_number<long>(section, key, v));
  } else {
    handled = false;
  }
}

}  // namespace

json RunConfig::to_json() const {
  json in = json::array();
  for (const auto& p : inputs) in.push_back(p.string());
  return {
      {"subcommand", subcommand},
      {"inputs", in},
      {"output", output ? json(output->string()) : json(nullptr)},
      {"generation", provider_json(generation)},
      {"embedding", provider_json(embedding)},
      {"embed_batch_size", embed_batch_size},
      {"rewrite",
       {{"segment_budget", rewrite.segment_budget},
        {"max_retries", rewrite.max_retries},
        {"concurrency_limit", rewrite.concurrency_limit},
        {"retry_backoff_ms", rewrite.retry_backoff.count()},
        {"temperature", rewrite.temperature},
        {"max_output_factor", rewrite.max_output_factor}}},
      {"eval",
       {{"thresholds", eval.thresholds}, {"granularity", std::string(to_string(eval.granularity))}, {"tau", eval.tau}}},
      {"detect", {{"lexicon", lexicon ? json(lexicon->string()) : json(nullptr)}, {"fpr", fpr_budget}}},
  };
}

void apply_config_text(RunConfig& cfg, const std::string& contents) {
  pt::ptree tree;
  try {
    std::istringstream in(contents);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw UsageError("config: key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      const std::string v = unquote(node.get_value<std::string>());
      bool handled = false;
      try {
        if (section == "generation") {
          apply_provider(cfg.generation, section, key, v, handled);
          if (!handled && key == "system_prompt") {
            cfg.rewrite.system_prompt = v;
            handled = true;
          }
        } else if (section == "embedding") {
          apply_provider(cfg.embedding, section, key, v, handled);
          if (handled) continue;
          handled = true;
          if (key == "batch_size") {
            cfg.embed_batch_size = parse_number<std::size_t>(section, key, v);
          } else if (key == "cache_dir") {
            cfg.cache_dir = v;
          } else if (key == "dim") {
            cfg.embed_dim = parse_number<std::size_t>(section, key, v);
          } else {
            handled = false;
          }
        } else if (section == "rewrite") {
          handled = true;
          if (key == "segment_budget") {
            cfg.rewrite.segment_budget = parse_number<std::size_t>(section, key, v);
          } else if (key == "max_retries") {
            cfg.rewrite.max_retries = parse_number<std::size_t>(section, key, v);
          } else if (key == "concurrency_limit") {
            cfg.rewrite.concurrency_limit = parse_number<std::size_t>(section, key, v);
          } else if (key == "retry_backoff_ms") {
            cfg.rewrite.retry_backoff = std::chrono::milliseconds(parse_number<long>(section, key, v));
          } else if (key == "temperature") {
            cfg.rewrite.temperature = parse_number<double>(section, key, v);
          } else if (key == "max_output_factor") {
            cfg.rewrite.max_output_factor = parse_number<double>(section, key, v);
          } else {
            handled = false;
          }
        } else if (section == "eval") {
          handled = true;
          if (key == "thresholds") {
            cfg.eval.thresholds = lexmatch::EvalConfig::parse_grid(v);
          } else if (key == "granularity") {
            cfg.eval.granularity = parse_granularity(v);
          } else if (key == "tau") {
            cfg.eval.tau = parse_number<double>(section, key, v);
          } else {
            handled = false;
          }
        } else if (section == "detect") {
          handled = true;
          if (key == "lexicon") {
            cfg.lexicon = v;
          } else if (key == "fpr") {
            cfg.fpr_budget = parse_number<double>(section, key, v);
          } else {
            handled = false;
          }
        } else {
          throw UsageError("config: unknown section [" + section + "]");
        }
      } catch (const std::invalid_argument& e) {
        throw UsageError("config [" + section + "] " + key + ": " + e.what());
      }
      if (!handled) throw UsageError("config: unknown key '" + key + "' in [" + section + "]");
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str());
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* url = std::getenv("RETRACE_GENERATION_URL"); url != nullptr && *url != '\0') {
    cfg.generation.endpoint.base_url = url;
  }
  if (const char* url = std::getenv("RETRACE_EMBEDDING_URL"); url != nullptr && *url != '\0') {
    cfg.embedding.endpoint.base_url = url;
  }
}

std::unique_ptr<GenerationClient> make_generation_client(const ProviderSettings& settings) {
  if (settings.provider == "mock:echo") return std::make_unique<EchoGenerationClient>();
  if (settings.provider == "http") return std::make_unique<HttpChatClient>(settings.endpoint);
  throw UsageError("unknown generation provider '" + settings.provider + "'");
}

std::unique_ptr<semantic::EmbeddingClient> make_embedding_client(const ProviderSettings& settings,
                                                                 std::size_t mock_dim) {
  if (settings.provider == "mock:hash") return std::make_unique<semantic::HashEmbeddingClient>(mock_dim);
  if (settings.provider == "http") return std::make_unique<semantic::HttpEmbeddingClient>(settings.endpoint);
  throw UsageError("unknown embedding provider '" + settings.provider + "'");
}

}  // namespace retrace
