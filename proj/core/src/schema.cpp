#include "zsparse/schema.hpp"

#include <cctype>
#include <fstream>

#include <nlohmann/json.hpp>

namespace zsp {

using nlohmann::json;

bool is_valid_label(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (!(std::isupper(static_cast<unsigned char>(c)) ||
          std::isdigit(static_cast<unsigned char>(c)) || c == '_')) {
      return false;
    }
  }
  return true;
}

std::string naturalize_label(std::string_view label) {
  std::string out;
  out.reserve(label.size());
  bool pending_space = false;
  for (char c : label) {
    if (c == '_') {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(
        static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

Schema Schema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw SchemaError("cannot open schema file: " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("schema parse error in " + path.string() + ": " +
                      e.what());
  }
  return from_json(doc);
}

Schema Schema::from_json(const json& doc) {
  Schema s;
  if (!doc.is_object() || !doc.contains("intents") || !doc.contains("slots")) {
    throw SchemaError("schema document must have top-level 'intents' and 'slots'");
  }
  for (const auto& entry : doc.at("slots")) {
    if (!entry.contains("name")) {
      throw SchemaError("slot entry missing 'name'");
    }
    std::string name = entry.at("name").get<std::string>();
    if (!is_valid_label(name)) {
      throw SchemaError("invalid slot name: '" + name + "'");
    }
    if (s.slot_index_.count(name)) {
      throw SchemaError("duplicate slot " + name);
    }
    if (!entry.contains("question") ||
        entry.at("question").get<std::string>().empty()) {
      throw SchemaError("slot " + name + " has no question");
    }
    s.slot_index_.emplace(name, s.slots_.size());
    s.slots_.push_back(name);
    s.questions_.emplace(name, entry.at("question").get<std::string>());
    std::vector<std::string> nested;
    if (entry.contains("nested_intents")) {
      nested = entry.at("nested_intents").get<std::vector<std::string>>();
    }
    s.s2ni_.emplace(name, std::move(nested));
  }
  for (const auto& entry : doc.at("intents")) {
    if (!entry.contains("name")) {
      throw SchemaError("intent entry missing 'name'");
    }
    std::string name = entry.at("name").get<std::string>();
    if (!is_valid_label(name)) {
      throw SchemaError("invalid intent name: '" + name + "'");
    }
    if (s.intent_index_.count(name)) {
      throw SchemaError("duplicate intent " + name);
    }
    s.intent_index_.emplace(name, s.intents_.size());
    s.intents_.push_back(name);
    std::vector<std::string> slots;
    if (entry.contains("slots")) {
      slots = entry.at("slots").get<std::vector<std::string>>();
    }
    for (const auto& sl : slots) {
      if (!s.slot_index_.count(sl)) {
        throw SchemaError("intent " + name + " references undeclared slot " + sl);
      }
      s.s2i_.try_emplace(sl, name);  // first declaring intent owns the slot
    }
    s.i2s_.emplace(name, std::move(slots));
  }
  s.validate();
  return s;
}

void Schema::validate() const {
  for (const auto& slot : slots_) {
    for (const auto& intent : s2ni_.at(slot)) {
      if (!intent_index_.count(intent)) {
        throw SchemaError("slot " + slot + " names unknown nested intent " +
                          intent);
      }
      // A nested intent cannot itself host nested intents (depth <= 4).
      for (const auto& nested_slot : i2s_.at(intent)) {
        if (!s2ni_.at(nested_slot).empty()) {
          throw SchemaError("depth limit exceeded: nested intent " + intent +
                            " has slot " + nested_slot +
                            " with nested intent candidates");
        }
      }
    }
  }
}

std::size_t Schema::intent_order(const std::string& name) const {
  auto it = intent_index_.find(name);
  if (it == intent_index_.end()) {
    throw SchemaError("unknown intent " + name);
  }
  return it->second;
}

const std::string& Schema::question(const std::string& slot) const {
  auto it = questions_.find(slot);
  if (it == questions_.end()) {
    throw SchemaError("unknown slot " + slot);
  }
  return it->second;
}

const std::vector<std::string>& Schema::slots_of(
    const std::string& intent) const {
  auto it = i2s_.find(intent);
  if (it == i2s_.end()) {
    throw SchemaError("unknown intent " + intent);
  }
  return it->second;
}

const std::string& Schema::owner_of(const std::string& slot) const {
  static const std::string kEmpty;
  if (!slot_index_.count(slot)) {
    throw SchemaError("unknown slot " + slot);
  }
  auto it = s2i_.find(slot);
  return it == s2i_.end() ? kEmpty : it->second;
}

const std::vector<std::string>& Schema::nested_candidates(
    const std::string& slot) const {
  auto it = s2ni_.find(slot);
  if (it == s2ni_.end()) {
    throw SchemaError("unknown slot " + slot);
  }
  return it->second;
}

}  // namespace zsp
