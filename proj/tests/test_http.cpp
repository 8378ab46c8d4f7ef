#include "retrace/generation.hpp"
#include "retrace/semantic.hpp"

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>

using namespace retrace;
using json = nlohmann::json;

namespace {

class LocalServer {
 public:
  LocalServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth = req.get_header_value("Authorization");
      last_body = json::parse(req.body);
      if (status_ != 200) {
        res.status = status_;
        return;
      }
      const std::string text = last_body["messages"].back()["content"];
      res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", "echo:" + text}}}}}}}.dump(),
                      "application/json");
    });
    server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      last_body = json::parse(req.body);
      json data = json::array();
      // Reply out of order; the client must sort by index.
      const auto& input = last_body["input"];
      for (std::size_t i = input.size(); i-- > 0;) {
        data.push_back({{"index", i}, {"embedding", {static_cast<double>(input[i].get<std::string>().size()), 1.0}}});
      }
      res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  EndpointConfig endpoint() const {
    return {"http://127.0.0.1:" + std::to_string(port_) + "/v1", "test-model", "RETRACE_TEST_KEY",
            std::chrono::seconds(5)};
  }
  void fail_with(int status) { status_ = status; }

  std::string last_auth;
  json last_body;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::atomic<int> status_{200};
  std::thread thread_;
};

}  // namespace

TEST(Http, ChatCompletionRoundTrip) {
  LocalServer server;
  setenv("RETRACE_TEST_KEY", "secret", 1);
  HttpChatClient client(server.endpoint());
  GenerationRequest req;
  req.system = "be terse";
  req.prompt = "hello";
  req.payload = "not sent";
  req.max_tokens = 10;
  EXPECT_EQ(client.generate(req), "echo:hello");
  EXPECT_EQ(server.last_auth, "Bearer secret");
  EXPECT_EQ(server.last_body["model"], "test-model");
  EXPECT_EQ(server.last_body["messages"].size(), 2u);
  EXPECT_EQ(server.last_body["messages"][0]["role"], "system");
  EXPECT_EQ(server.last_body["max_tokens"], 10);
  EXPECT_EQ(server.last_body["temperature"], 0.0);
  EXPECT_EQ(server.last_body.dump().find("not sent"), std::string::npos);
}

TEST(Http, StatusClassification) {
  LocalServer server;
  setenv("RETRACE_TEST_KEY", "secret", 1);
  HttpChatClient client(server.endpoint());
  GenerationRequest req;
  req.prompt = "x";
  server.fail_with(503);
  try {
    client.generate(req);
    FAIL();
  } catch (const GenerationError& e) {
    EXPECT_TRUE(e.retryable());
  }
  server.fail_with(400);
  try {
    client.generate(req);
    FAIL();
  } catch (const GenerationError& e) {
    EXPECT_FALSE(e.retryable());
  }
}

TEST(Http, MissingCredentialIsFatal) {
  LocalServer server;
  auto ep = server.endpoint();
  ep.api_key_env = "RETRACE_TEST_UNSET_KEY";
  unsetenv("RETRACE_TEST_UNSET_KEY");
  HttpChatClient client(ep);
  try {
    client.generate(GenerationRequest{});
    FAIL();
  } catch (const GenerationError& e) {
    EXPECT_FALSE(e.retryable());
    EXPECT_NE(std::string(e.what()).find("RETRACE_TEST_UNSET_KEY"), std::string::npos);
  }
}

TEST(Http, UnreachableEndpointIsRetryable) {
  setenv("RETRACE_TEST_KEY", "secret", 1);
  HttpChatClient client({"http://127.0.0.1:1/v1", "m", "RETRACE_TEST_KEY", std::chrono::seconds(2)});
  try {
    client.generate(GenerationRequest{});
    FAIL();
  } catch (const GenerationError& e) {
    EXPECT_TRUE(e.retryable());
  }
}

TEST(Http, EmbeddingsOrderedByIndex) {
  LocalServer server;
  setenv("RETRACE_TEST_KEY", "secret", 1);
  semantic::HttpEmbeddingClient client(server.endpoint());
  const std::vector<std::string> texts{"a", "bbb", "cc"};
  const auto v = client.embed(texts);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0][0], 1.0);
  EXPECT_EQ(v[1][0], 3.0);
  EXPECT_EQ(v[2][0], 2.0);
  EXPECT_EQ(server.last_body["model"], "test-model");
}
