#include "hycomp/hypernyms.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "hycomp/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace hycomp {

namespace {

using json = nlohmann::json;

std::string trim_lower(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  std::string out = s.substr(a, b - a);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Models often wrap JSON in markdown fences.
std::string strip_fences(const std::string& s) {
  const auto first = s.find('{');
  const auto last = s.rfind('}');
  if (first == std::string::npos || last == std::string::npos || last < first)
    return s;
  return s.substr(first, last - first + 1);
}

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("hypernyms: endpoint must be an http(s) URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl p;
  if (path_start == std::string::npos) {
    p.base = url;
    p.path = "/";
  } else {
    p.base = url.substr(0, path_start);
    p.path = url.substr(path_start);
  }
  return p;
}

}  // namespace

std::string hypernym_prompt(const std::vector<std::string>& categories,
                            const std::string& kind) {
  std::ostringstream list;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (i) list << ", ";
    list << categories[i];
  }
  std::ostringstream p;
  p << "You are an expert linguist and knowledge graph constructor "
       "specializing in semantic hierarchies. Your task is to identify the "
       "general parent concept (hypernym) for each term in a given list of "
    << kind << "s: {" << list.str() << "}.\n\n"
    << "Rules:\n"
    << "1. The parent concept must be a single, common English word. Do not "
       "use phrases.\n"
    << "2. Similar concepts must be mapped to the same parent for "
       "consistency.\n"
    << "3. The KEYS of the output object should be the general parent "
       "concepts you identify.\n"
    << "4. The VALUE for each key should be a list of all the child terms "
       "from the input that belong to that parent.\n\n"
    << "Examples:\n"
    << "  fruit: [apple, banana, orange, ...]\n"
    << "  animal: [dog, cat, horse, ...]\n\n"
    << "Reply with a single JSON object only.";
  return p.str();
}

std::map<std::string, std::string> parse_hypernym_reply(
    const std::string& content, const std::vector<std::string>& categories) {
  json j;
  try {
    j = json::parse(strip_fences(content));
  } catch (const std::exception& e) {
    throw DataError(std::string("hypernyms: reply is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("hypernyms: reply is not a JSON object");

  std::map<std::string, std::string> out;
  for (const auto& [parent, children] : j.items()) {
    if (!children.is_array())
      throw DataError("hypernyms: value for '" + parent + "' is not an array");
    for (const auto& c : children)
      out[trim_lower(c.get<std::string>())] = trim_lower(parent);
  }

  std::vector<std::string> missing;
  for (const auto& cat : categories)
    if (!out.count(trim_lower(cat))) missing.push_back(cat);
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "hypernyms: reply does not cover";
    for (const auto& m : missing) msg << " '" << m << "'";
    throw DataError(msg.str());
  }

  std::map<std::string, std::string> covered;
  for (const auto& cat : categories) covered[cat] = out.at(trim_lower(cat));
  return covered;
}

std::map<std::string, std::string> generate_hypernyms(
    const std::string& endpoint_url, const std::string& api_key,
    const std::vector<std::string>& categories, const std::string& kind,
    const std::string& model, int max_attempts) {
  if (categories.empty()) return {};

  const ParsedUrl url = parse_url(endpoint_url);
  httplib::Client client(url.base);
  client.set_read_timeout(60, 0);
  httplib::Headers headers;
  if (!api_key.empty())
    headers.insert({"Authorization", "Bearer " + api_key});

  json body;
  body["model"] = model;
  body["messages"] = json::array(
      {{{"role", "user"}, {"content", hypernym_prompt(categories, kind)}}});
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    auto res = client.Post(url.path, headers, payload, "application/json");
    if (!res) {
      last_error = "network failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      json reply = json::parse(res->body);
      const std::string content =
          reply.at("choices").at(0).at("message").at("content")
              .get<std::string>();
      return parse_hypernym_reply(content, categories);
    } catch (const std::exception& e) {
      last_error = e.what();
    }
  }
  throw DataError("hypernyms: giving up after " +
                  std::to_string(max_attempts) + " attempts: " + last_error);
}

}  // namespace hycomp
