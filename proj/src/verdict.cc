#include <cctype>
#include <regex>

#include "hallucheck/pipeline.h"

namespace hallucheck {
namespace {

enum class Polarity { None, Yes, No };

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

Polarity classify(std::string_view token) {
  std::size_t b = 0;
  std::size_t e = token.size();
  while (b < e && is_punct(token[b])) ++b;
  while (e > b && is_punct(token[e - 1])) --e;
  std::string word;
  for (std::size_t i = b; i < e; ++i) {
    word += static_cast<char>(std::tolower(static_cast<unsigned char>(token[i])));
  }
  if (word == "yes") return Polarity::Yes;
  if (word == "no") return Polarity::No;
  return Polarity::None;
}

std::vector<Polarity> scan(std::string_view text) {
  std::vector<Polarity> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) {
      auto p = classify(text.substr(start, i - start));
      if (p != Polarity::None) out.push_back(p);
    }
  }
  return out;
}

std::string_view final_nonempty_line(std::string_view text) {
  std::size_t end = text.size();
  while (end > 0) {
    std::size_t start = text.rfind('\n', end - 1);
    start = (start == std::string_view::npos) ? 0 : start + 1;
    auto line = text.substr(start, end - start);
    for (char c : line) {
      if (!is_space(c)) return line;
    }
    if (start == 0) break;
    end = start - 1;
  }
  return {};
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

VerdictParse parse_verdict(std::string_view text) {
  auto last_line = scan(final_nonempty_line(text));
  bool yes = false;
  bool no = false;
  for (auto p : last_line) {
    yes |= p == Polarity::Yes;
    no |= p == Polarity::No;
  }
  if (yes != no) return {yes, ParseStatus::Clean};

  auto all = scan(text);
  if (all.empty()) return {false, ParseStatus::ParseFailedDefault};
  return {all.back() == Polarity::Yes, ParseStatus::AmbiguousResolved};
}

std::string strip_revision_label(std::string_view text) {
  static const std::regex label(
      R"(^[ \t]*[*#_]*[ \t]*revised[ \t]+[a-z0-9 ]{1,30}?[ \t]*[*_]*:[*_]*[ \t]*)",
      std::regex::icase);
  auto body = trim(text);
  std::string s(body);
  std::smatch m;
  if (std::regex_search(s, m, label, std::regex_constants::match_continuous)) {
    s.erase(0, static_cast<std::size_t>(m.length(0)));
  }
  return std::string(trim(s));
}

}  // namespace hallucheck
