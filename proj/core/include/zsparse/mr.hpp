#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "zsparse/schema.hpp"

namespace zsp {

struct MRError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IntentFrame;

// A slot filling holds either a verbatim text span or a nested intent
// frame, never both.
struct SlotFilling {
  std::string slot;
  std::string text;                      // empty iff nested is set
  std::shared_ptr<IntentFrame> nested;   // null iff text value

  bool is_nested() const { return nested != nullptr; }
};

struct IntentFrame {
  std::string intent;
  std::vector<SlotFilling> fillings;
};

// Collapses whitespace runs to single spaces and trims.
std::string normalize_text(std::string_view text);

std::vector<std::string> tokenize(std::string_view text);

// Depth in alternating IN/SL levels: a bare intent is 1, its slots 2,
// a nested intent 3, nested slots 4.
int frame_depth(const IntentFrame& frame);

// Parses the bracketed form `[IN:X [SL:Y tokens ] ]`. With a schema,
// also enforces label membership and i2s consistency.
IntentFrame parse_mr(std::string_view text, const Schema* schema = nullptr);

// Canonical serialization: single spaces between tokens, a space
// before every `]`, fillings in stored order.
std::string serialize_mr(const IntentFrame& frame);

// True iff intents are equal and filling multisets are equal (slot
// label plus recursively equal value) after whitespace normalization
// of text values. Set `ordered` to require identical filling order.
bool exact_match(const IntentFrame& a, const IntentFrame& b,
                 bool ordered = false);

}  // namespace zsp
