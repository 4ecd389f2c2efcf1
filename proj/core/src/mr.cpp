#include "zsparse/mr.hpp"

#include <algorithm>
#include <sstream>

namespace zsp {

namespace {

constexpr std::string_view kIntentOpen = "[IN:";
constexpr std::string_view kSlotOpen = "[SL:";

struct Parser {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  const Schema* schema;

  [[noreturn]] void fail(const std::string& msg) const {
    throw MRError("grammar error at token " + std::to_string(pos) + ": " + msg);
  }

  const std::string& peek() const {
    if (pos >= tokens.size()) {
      throw MRError("grammar error at token " + std::to_string(pos) +
                    ": unexpected end of input");
    }
    return tokens[pos];
  }

  IntentFrame parse_intent(int depth) {
    const std::string& tok = peek();
    if (!tok.starts_with(kIntentOpen)) fail("expected [IN: token, got '" + tok + "'");
    IntentFrame frame;
    frame.intent = tok.substr(kIntentOpen.size());
    if (!is_valid_label(frame.intent)) fail("invalid intent label '" + frame.intent + "'");
    if (depth > 3) fail("depth limit exceeded");
    ++pos;
    while (peek() != "]") {
      frame.fillings.push_back(parse_slot(depth + 1));
    }
    ++pos;  // consume ]
    if (schema) {
      if (!schema->has_intent(frame.intent)) {
        throw MRError("schema validation error: unknown intent " + frame.intent);
      }
      const auto& allowed = schema->slots_of(frame.intent);
      for (const auto& f : frame.fillings) {
        if (std::find(allowed.begin(), allowed.end(), f.slot) == allowed.end()) {
          throw MRError("schema validation error: slot " + f.slot +
                        " not in i2s(" + frame.intent + ")");
        }
      }
    }
    return frame;
  }

  SlotFilling parse_slot(int depth) {
    const std::string& tok = peek();
    if (!tok.starts_with(kSlotOpen)) fail("expected [SL: token, got '" + tok + "'");
    SlotFilling filling;
    filling.slot = tok.substr(kSlotOpen.size());
    if (!is_valid_label(filling.slot)) fail("invalid slot label '" + filling.slot + "'");
    ++pos;
    std::vector<std::string> text_tokens;
    while (peek() != "]") {
      const std::string& inner = peek();
      if (inner.starts_with(kIntentOpen)) {
        if (filling.nested) fail("multiple nested intents in slot " + filling.slot);
        filling.nested = std::make_shared<IntentFrame>(parse_intent(depth + 1));
      } else if (inner.starts_with(kSlotOpen)) {
        fail("slot token inside slot " + filling.slot);
      } else {
        text_tokens.push_back(inner);
        ++pos;
      }
    }
    ++pos;  // consume ]
    if (filling.nested && !text_tokens.empty()) {
      fail("slot " + filling.slot + " mixes text and nested intent");
    }
    if (!filling.nested) {
      if (text_tokens.empty()) fail("empty value in slot " + filling.slot);
      std::string text;
      for (const auto& t : text_tokens) {
        if (!text.empty()) text.push_back(' ');
        text += t;
      }
      filling.text = std::move(text);
    }
    return filling;
  }
};

void append_frame(std::string& out, const IntentFrame& frame);

void append_filling(std::string& out, const SlotFilling& f) {
  out += "[SL:";
  out += f.slot;
  out.push_back(' ');
  if (f.is_nested()) {
    append_frame(out, *f.nested);
    out.push_back(' ');
  } else {
    out += normalize_text(f.text);
    out.push_back(' ');
  }
  out.push_back(']');
}

void append_frame(std::string& out, const IntentFrame& frame) {
  out += "[IN:";
  out += frame.intent;
  out.push_back(' ');
  for (const auto& f : frame.fillings) {
    append_filling(out, f);
    out.push_back(' ');
  }
  out.push_back(']');
}

// Canonical comparison key: multiset semantics come from sorting the
// filling keys.
std::string frame_key(const IntentFrame& frame);

std::string filling_key(const SlotFilling& f) {
  if (f.is_nested()) return f.slot + "=" + frame_key(*f.nested);
  return f.slot + "=" + normalize_text(f.text);
}

std::string frame_key(const IntentFrame& frame) {
  std::vector<std::string> keys;
  keys.reserve(frame.fillings.size());
  for (const auto& f : frame.fillings) keys.push_back(filling_key(f));
  std::sort(keys.begin(), keys.end());
  std::string out = frame.intent + "(";
  for (const auto& k : keys) {
    out += k;
    out.push_back(';');
  }
  out.push_back(')');
  return out;
}

std::string frame_key_ordered(const IntentFrame& frame) {
  std::string out = frame.intent + "(";
  for (const auto& f : frame.fillings) {
    if (f.is_nested()) {
      out += f.slot + "=" + frame_key_ordered(*f.nested);
    } else {
      out += f.slot + "=" + normalize_text(f.text);
    }
    out.push_back(';');
  }
  out.push_back(')');
  return out;
}

}  // namespace

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!out.empty()) pending = true;
      continue;
    }
    if (pending) {
      out.push_back(' ');
      pending = false;
    }
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

int frame_depth(const IntentFrame& frame) {
  int below = 0;
  for (const auto& f : frame.fillings) {
    below = std::max(below, f.is_nested() ? 1 + frame_depth(*f.nested) : 1);
  }
  return 1 + below;
}

IntentFrame parse_mr(std::string_view text, const Schema* schema) {
  Parser p{tokenize(text), 0, schema};
  if (p.tokens.empty()) throw MRError("grammar error at token 0: empty input");
  IntentFrame frame = p.parse_intent(1);
  if (p.pos != p.tokens.size()) {
    throw MRError("grammar error at token " + std::to_string(p.pos) +
                  ": trailing tokens after top-level frame");
  }
  if (frame_depth(frame) > 4) throw MRError("depth limit exceeded");
  return frame;
}

std::string serialize_mr(const IntentFrame& frame) {
  std::string out;
  append_frame(out, frame);
  return out;
}

bool exact_match(const IntentFrame& a, const IntentFrame& b, bool ordered) {
  if (ordered) return frame_key_ordered(a) == frame_key_ordered(b);
  return frame_key(a) == frame_key(b);
}

}  // namespace zsp
