#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace zsp {

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Domain schema: intents, slots, one question per slot, and the
// intent-to-slot / slot-to-intent / slot-to-nested-intent mappings.
// Immutable after load; safe to share across threads.
class Schema {
 public:
  // Loads and validates a schema document (see docs/schema format in
  // README). Throws SchemaError naming the first violated invariant.
  static Schema load(const std::filesystem::path& path);
  static Schema from_json(const nlohmann::json& doc);

  const std::vector<std::string>& intents() const { return intents_; }
  const std::vector<std::string>& slots() const { return slots_; }

  bool has_intent(const std::string& name) const {
    return intent_index_.count(name) != 0;
  }
  bool has_slot(const std::string& name) const {
    return slot_index_.count(name) != 0;
  }
  // Position in document order; used for deterministic tie-breaking.
  std::size_t intent_order(const std::string& name) const;

  const std::string& question(const std::string& slot) const;
  // i2s: slots of an intent, in document order.
  const std::vector<std::string>& slots_of(const std::string& intent) const;
  // s2i: owning intent (first declaring intent in document order).
  // Empty string when the slot is declared but unused.
  const std::string& owner_of(const std::string& slot) const;
  // s2ni: candidate nested intents of a slot, in document order.
  const std::vector<std::string>& nested_candidates(
      const std::string& slot) const;

 private:
  std::vector<std::string> intents_;
  std::vector<std::string> slots_;
  std::unordered_map<std::string, std::size_t> intent_index_;
  std::unordered_map<std::string, std::size_t> slot_index_;
  std::unordered_map<std::string, std::string> questions_;
  std::unordered_map<std::string, std::vector<std::string>> i2s_;
  std::unordered_map<std::string, std::string> s2i_;
  std::unordered_map<std::string, std::vector<std::string>> s2ni_;

  void validate() const;
};

// CREATE_CALL -> "create call". Lowercase, underscore runs become a
// single space, no leading/trailing whitespace.
std::string naturalize_label(std::string_view label);

bool is_valid_label(std::string_view name);

}  // namespace zsp
