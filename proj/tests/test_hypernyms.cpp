#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "hycomp/errors.hpp"
#include "hycomp/hypernyms.hpp"
#include "json.hpp"

using namespace hycomp;
using json = nlohmann::json;

namespace {

// Chat-completion mock: replies with a fixed content string per request,
// cycling through the configured list.
struct MockServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> hits{0};
  std::vector<std::string> contents;
  std::string last_body;
  std::string last_auth;

  explicit MockServer(std::vector<std::string> replies)
      : contents(std::move(replies)) {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                               httplib::Response& res) {
      const int n = hits.fetch_add(1);
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      const std::string& content =
          contents[std::min<std::size_t>(n, contents.size() - 1)];
      json reply;
      reply["choices"] =
          json::array({{{"message", {{"role", "assistant"},
                                     {"content", content}}}}});
      res.set_content(reply.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~MockServer() {
    server.stop();
    thread.join();
  }

  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  }
};

}  // namespace

TEST_CASE("prompt embeds the category list and the output rules") {
  const std::string p = hypernym_prompt({"apple", "banana", "dog"}, "object");
  CHECK(p.find("{apple, banana, dog}") != std::string::npos);
  CHECK(p.find("expert linguist") != std::string::npos);
  CHECK(p.find("hypernym") != std::string::npos);
  CHECK(p.find("single, common English word") != std::string::npos);
}

TEST_CASE("well-formed reply resolves every category to its parent") {
  MockServer mock({R"({"fruit": ["apple", "banana"], "animal": ["dog"]})"});
  const auto parents = generate_hypernyms(mock.url(), "secret-key",
                                          {"apple", "banana", "dog"}, "object");
  CHECK(parents.at("apple") == "fruit");
  CHECK(parents.at("banana") == "fruit");
  CHECK(parents.at("dog") == "animal");
  CHECK(mock.hits == 1);
  CHECK(mock.last_auth == "Bearer secret-key");
  const json body = json::parse(mock.last_body);
  CHECK(body["model"] == "gemini-2.5-pro");
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["messages"][0]["content"].get<std::string>().find("apple") !=
        std::string::npos);
}

TEST_CASE("markdown fences and mixed case are tolerated") {
  MockServer mock({"```json\n{\"Fruit\": [\" Apple \", \"banana\"]}\n```"});
  const auto parents =
      generate_hypernyms(mock.url(), "", {"apple", "banana"}, "object");
  CHECK(parents.at("apple") == "fruit");
  CHECK(parents.at("banana") == "fruit");
}

TEST_CASE("reply omitting a category fails naming it") {
  MockServer mock({R"({"fruit": ["apple", "banana"]})"});
  CHECK_THROWS_WITH_AS(
      generate_hypernyms(mock.url(), "", {"apple", "banana", "dog"}, "object"),
      doctest::Contains("'dog'"), DataError);
  CHECK(mock.hits == 3);  // exhausted its retries
}

TEST_CASE("malformed replies are retried until a valid one lands") {
  MockServer mock({"not json at all", R"({"animal": ["dog"]})"});
  const auto parents = generate_hypernyms(mock.url(), "", {"dog"}, "object");
  CHECK(parents.at("dog") == "animal");
  CHECK(mock.hits == 2);
}

TEST_CASE("empty category list never touches the network") {
  MockServer mock({R"({"x": ["y"]})"});
  const auto parents = generate_hypernyms(mock.url(), "", {}, "object");
  CHECK(parents.empty());
  CHECK(mock.hits == 0);
}

TEST_CASE("parse_hypernym_reply validates the payload shape") {
  CHECK_THROWS_AS(parse_hypernym_reply("[1,2,3]", {"a"}), DataError);
  CHECK_THROWS_AS(parse_hypernym_reply(R"({"p": "not-an-array"})", {"a"}),
                  DataError);
  const auto m = parse_hypernym_reply(R"({"p": ["a"], "q": ["b"]})", {"a", "b"});
  CHECK(m.at("a") == "p");
  CHECK(m.at("b") == "q");
}
