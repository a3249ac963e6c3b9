#include "mpe/uai.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace mpe {

namespace {

struct Token {
  std::string_view text;
  std::size_t line;
  std::size_t offset;
};

class TokenStream {
 public:
  explicit TokenStream(std::string_view text) {
    std::size_t line = 1;
    std::size_t line_start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
      const char c = text[i];
      if (c == '\n') {
        ++line;
        line_start = ++i;
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
        continue;
      }
      const std::size_t begin = i;
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      tokens_.push_back({text.substr(begin, i - begin), line, begin - line_start + 1});
    }
  }

  bool done() const { return pos_ >= tokens_.size(); }
  std::size_t remaining() const { return tokens_.size() - pos_; }

  const Token& next(std::string_view expecting) {
    if (done()) {
      const std::size_t line = tokens_.empty() ? 0 : tokens_.back().line;
      throw ParseError(fmt::format("unexpected end of input, expected {}", expecting), line, 0);
    }
    return tokens_[pos_++];
  }

  std::size_t next_count(std::string_view expecting) {
    const Token& t = next(expecting);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || ptr != t.text.data() + t.text.size())
      throw ParseError(fmt::format("expected {}, got '{}'", expecting, t.text), t.line, t.offset);
    return v;
  }

  // Probability entry; strtod handles exponents and the odd 'inf'/'nan' we reject.
  double next_probability() {
    const Token& t = next("probability");
    std::string s(t.text);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
      throw ParseError(fmt::format("expected probability, got '{}'", t.text), t.line, t.offset);
    if (!std::isfinite(v))
      throw ParseError(fmt::format("non-finite probability '{}'", t.text), t.line, t.offset);
    if (v < 0.0)
      throw ParseError(fmt::format("negative probability '{}'", t.text), t.line, t.offset);
    return v;
  }

  const Token& last() const { return tokens_[pos_ - 1]; }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

GraphicalModel parse_uai(std::string_view text) {
  TokenStream ts(text);
  const Token& preamble = ts.next("MARKOV or BAYES");
  if (preamble.text != "MARKOV" && preamble.text != "BAYES")
    throw ParseError(fmt::format("unknown preamble '{}'", preamble.text), preamble.line,
                     preamble.offset);

  const std::size_t n = ts.next_count("variable count");
  std::vector<std::size_t> cards(n);
  for (std::size_t i = 0; i < n; ++i) {
    cards[i] = ts.next_count("cardinality");
    if (cards[i] == 0)
      throw ParseError("cardinality must be positive", ts.last().line, ts.last().offset);
  }

  const std::size_t num_factors = ts.next_count("factor count");
  std::vector<std::vector<VarIndex>> scopes(num_factors);
  for (auto& scope : scopes) {
    const std::size_t arity = ts.next_count("scope size");
    scope.resize(arity);
    for (auto& v : scope) {
      const std::size_t idx = ts.next_count("scope variable");
      if (idx >= n)
        throw ParseError(fmt::format("scope index out of range: {} (model has {} variables)", idx, n),
                         ts.last().line, ts.last().offset);
      v = static_cast<VarIndex>(idx);
    }
    for (std::size_t a = 0; a < arity; ++a)
      for (std::size_t b = a + 1; b < arity; ++b)
        if (scope[a] == scope[b])
          throw ParseError(fmt::format("repeated variable {} in factor scope", scope[a]),
                           ts.last().line, ts.last().offset);
  }

  std::vector<Factor> factors;
  factors.reserve(num_factors);
  for (const auto& scope : scopes) {
    std::size_t expected = 1;
    for (VarIndex v : scope) expected *= cards[v];
    const std::size_t size = ts.next_count("table size");
    if (size != expected)
      throw ParseError(fmt::format("table-size mismatch: table declares {} entries, scope needs {}",
                                   size, expected),
                       ts.last().line, ts.last().offset);
    std::vector<double> table(size);
    for (auto& e : table) {
      const double p = ts.next_probability();
      e = p == 0.0 ? kZeroLog : std::log(p);
    }
    factors.emplace_back(scope, std::move(table));
  }
  if (!ts.done()) {
    const Token& extra = ts.next("end of input");
    throw ParseError(fmt::format("trailing token '{}'", extra.text), extra.line, extra.offset);
  }
  return GraphicalModel(std::move(cards), std::move(factors));
}

std::string serialize_uai(const GraphicalModel& model) {
  std::string out = "MARKOV\n";
  out += fmt::format("{}\n", model.num_vars());
  out += fmt::format("{}\n", fmt::join(model.cardinalities(), " "));
  out += fmt::format("{}\n", model.num_factors());
  for (const auto& f : model.factors())
    out += fmt::format("{} {}\n", f.scope().size(), fmt::join(f.scope(), " "));
  for (const auto& f : model.factors()) {
    out += fmt::format("\n{}\n", f.log_table().size());
    std::size_t col = 0;
    for (double lv : f.log_table()) {
      out += fmt::format("{:.17g}", is_zero_log(lv) ? 0.0 : std::exp(lv));
      out += (++col % 8 == 0) ? '\n' : ' ';
    }
    if (col % 8 != 0) out.back() = '\n';
  }
  return out;
}

std::map<VarIndex, Value> parse_evidence(std::string_view text, const GraphicalModel& model) {
  TokenStream ts(text);
  std::size_t count = ts.next_count("evidence count");
  // Older files prefix a sample count; only a single sample is meaningful here.
  if (ts.remaining() != 2 * count) {
    if (count != 1) throw ParseError("evidence pair count does not match declared count", 1, 1);
    count = ts.next_count("evidence count");
    if (ts.remaining() != 2 * count)
      throw ParseError("evidence pair count does not match declared count", ts.last().line,
                       ts.last().offset);
  }
  std::map<VarIndex, Value> evidence;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t var = ts.next_count("evidence variable");
    const Token& vt = ts.last();
    const std::size_t val = ts.next_count("evidence value");
    if (var >= model.num_vars())
      throw ParseError(fmt::format("evidence variable {} out of range", var), vt.line, vt.offset);
    if (val >= model.cardinality(static_cast<VarIndex>(var)))
      throw ParseError(fmt::format("evidence value {} outside domain of variable {}", val, var),
                       ts.last().line, ts.last().offset);
    if (!evidence.emplace(static_cast<VarIndex>(var), static_cast<Value>(val)).second)
      throw ParseError(fmt::format("variable {} observed twice", var), vt.line, vt.offset);
  }
  return evidence;
}

std::string serialize_evidence(const std::map<VarIndex, Value>& evidence) {
  std::string out = fmt::format("{}", evidence.size());
  for (const auto& [var, val] : evidence) out += fmt::format(" {} {}", var, val);
  out += '\n';
  return out;
}

std::string model_hash(const GraphicalModel& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_uai(model)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

GraphicalModel load_uai(const std::filesystem::path& path) { return parse_uai(read_text_file(path)); }

}  // namespace mpe
