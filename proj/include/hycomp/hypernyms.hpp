#pragma once

#include <map>
#include <string>
#include <vector>

namespace hycomp {

// Builds the hypernym-generation user prompt for a category list.
std::string hypernym_prompt(const std::vector<std::string>& categories,
                            const std::string& kind);

// Parses a model reply (a JSON object mapping parent -> [children]) into a
// child -> parent map; names are lowercased and trimmed. Throws DataError on
// malformed JSON or when `categories` are not all covered.
std::map<std::string, std::string> parse_hypernym_reply(
    const std::string& content, const std::vector<std::string>& categories);

// POSTs a chat-completion request and parses the reply, retrying up to
// `max_attempts` times on malformed replies. Never invents parents locally.
// An empty category list returns an empty map without touching the network.
std::map<std::string, std::string> generate_hypernyms(
    const std::string& endpoint_url, const std::string& api_key,
    const std::vector<std::string>& categories, const std::string& kind,
    const std::string& model = "gemini-2.5-pro", int max_attempts = 3);

}  // namespace hycomp
