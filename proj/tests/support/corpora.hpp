#pragma once

// Synthetic corpora with known ground truth, shared by unit and acceptance tests.

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragsynth/ragsynth.hpp"
#include "support/oracles.hpp"

namespace fixtures {

// ---------------------------------------------------------------------------
// Planted-entity corpus

struct PlantedCorpus {
  std::vector<ragsynth::AnnotatedRecord> records;
  std::map<std::string, std::size_t> planted_per_type;
  std::size_t total = 0;
};

namespace detail {

inline const std::map<std::string, std::vector<std::string>>& values() {
  static const std::map<std::string, std::vector<std::string>> v = {
      {"FIRSTNAME", {"John", "Maria", "Ahmed", "Priya", "Olivia", "Mateo", "Aisha", "Hiroshi", "Elena", "Kwame"}},
      {"LASTNAME", {"Smith", "Garcia", "Khan", "Patel", "Nguyen", "Müller", "Okafor", "Tanaka", "Dubois", "O'Brien"}},
      {"CITY", {"Boston", "Chicago", "Seattle", "San Francisco", "New York", "Toronto", "Lisbon", "Nairobi"}},
      {"STATE", {"California", "Texas", "Oregon", "Massachusetts", "Ontario", "North Carolina"}},
      {"GENDER", {"female", "male", "non-binary", "transgender"}},
      {"HOSPITALNAME",
       {"Mercy General Hospital", "St. Mary's Medical Center", "Mount Sinai Hospital", "Johns Hopkins Hospital",
        "Lakeside Regional Hospital", "Mayo Clinic"}},
      {"ORGANISATION", {"Acme Corporation", "Globex Industries", "Initech", "Stark Analytics", "Blue Harbor Bank"}},
      {"JOBTYPE", {"Software Engineer", "Data Scientist", "Registered Nurse", "Accountant", "Paralegal"}},
      {"JOBAREA", {"Finance", "Marketing", "Human Resources", "Logistics", "Compliance"}},
      {"DBAREA", {"Payroll Database", "HR Records System", "Customer Data Warehouse", "Claims Repository"}},
      {"MENTALHEALTHINFO", {"major depressive disorder", "bipolar disorder", "PTSD", "panic disorder"}},
      {"DISABILITYSTATUS", {"visually impaired", "a wheelchair user", "hearing impaired", "dyslexia"}},
  };
  return v;
}

inline std::string digits(std::mt19937_64& rng, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s.push_back(static_cast<char>('0' + rng() % 10));
  return s;
}

inline std::string generated_value(const std::string& type, std::mt19937_64& rng) {
  static const char* months[] = {"January", "March", "April", "July", "September", "November"};
  const auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  if (type == "TELEPHONENUM") {
    const auto body = digits(rng, 3) + "-" + digits(rng, 4);
    switch (pick(3)) {
      case 0: return "555-" + body;
      case 1: return "(555) " + body;
      default: return "+1 555-" + body;
    }
  }
  if (type == "EMAIL") return "user" + digits(rng, 4) + "@mail.example.com";
  if (type == "CARDNUMBER") {
    const char sep = pick(2) ? ' ' : '-';
    return "4111" + std::string(1, sep) + digits(rng, 4) + sep + digits(rng, 4) + sep + digits(rng, 4);
  }
  if (type == "SALARY") {
    const std::string amount = std::to_string(40 + pick(150)) + ",000";
    return pick(2) ? "$" + amount : "€" + amount;
  }
  if (type == "DATE" || type == "DOB") {
    const int day = 1 + static_cast<int>(pick(28));
    const int year = type == "DOB" ? 1950 + static_cast<int>(pick(50)) : 2015 + static_cast<int>(pick(10));
    switch (pick(3)) {
      case 0: return std::string(months[pick(6)]) + " " + std::to_string(day) + ", " + std::to_string(year);
      case 1: return std::to_string(day) + " " + months[pick(6)] + " " + std::to_string(year);
      default: {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, 1 + static_cast<int>(pick(12)), day);
        return buf;
      }
    }
  }
  const auto& list = values().at(type);
  return list[pick(list.size())];
}

inline std::vector<std::vector<std::string>> templates() {
  // Even positions are literals, odd positions are entity types.
  return {
      {"Patient ", "FIRSTNAME", " ", "LASTNAME", " was admitted to ", "HOSPITALNAME", " on ", "DATE",
       " after treatment for ", "MENTALHEALTHINFO", "."},
      {"Please contact ", "FIRSTNAME", " at ", "EMAIL", " or call ", "TELEPHONENUM", " before the review."},
      {"", "FIRSTNAME", " ", "LASTNAME", " works as a ", "JOBTYPE", " at ", "ORGANISATION", " in ", "CITY", ", ",
       "STATE", " earning ", "SALARY", " per year."},
      {"The card ", "CARDNUMBER", " was issued to a ", "GENDER", " customer who is ", "DISABILITYSTATUS", "."},
      {"Records in the ", "DBAREA", " list the ", "JOBAREA", " team lead as born on ", "DOB", "."},
  };
}

inline std::vector<std::string> filler(const std::string& type) {
  return {"The note mentions ", type, " in passing."};
}

inline ragsynth::AnnotatedRecord render(const std::vector<std::string>& tpl, std::mt19937_64& rng) {
  ragsynth::AnnotatedRecord rec;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < tpl.size(); ++i) {
    if (i % 2 == 0) {
      rec.text += tpl[i];
      offset += oracle::codepoints(tpl[i]);
      continue;
    }
    const auto value = generated_value(tpl[i], rng);
    const auto len = oracle::codepoints(value);
    rec.gold_spans.push_back({ragsynth::EntityType(tpl[i]), offset, offset + len, value, "planted"});
    rec.text += value;
    offset += len;
  }
  return rec;
}

}  // namespace detail

/// Records built from fixed templates whose entity slots are filled from the
/// shipped lists or generated formats. Exactly `target` entities are planted.
inline PlantedCorpus make_planted_corpus(std::uint64_t seed, std::size_t target = 200) {
  std::mt19937_64 rng(seed);
  PlantedCorpus out;
  const auto tpls = detail::templates();
  std::size_t t = 0;
  while (out.total < target) {
    auto tpl = tpls[t++ % tpls.size()];
    const std::size_t slots = tpl.size() / 2;
    if (out.total + slots > target) tpl = detail::filler(tpls[t % tpls.size()][1]);
    auto rec = detail::render(tpl, rng);
    for (const auto& s : rec.gold_spans) ++out.planted_per_type[s.type.name()];
    out.total += rec.gold_spans.size();
    out.records.push_back(std::move(rec));
  }
  return out;
}

/// Writes records as an {id, text} corpus file.
inline void write_corpus(const std::filesystem::path& path, const std::vector<ragsynth::AnnotatedRecord>& records) {
  std::ofstream out(path);
  for (std::size_t i = 0; i < records.size(); ++i) {
    out << nlohmann::json{{"id", "rec" + std::to_string(i)}, {"text", records[i].text}}.dump() << "\n";
  }
}

// ---------------------------------------------------------------------------
// Three lexically separated topics

inline const std::vector<std::vector<std::string>>& topic_vocabulary() {
  static const std::vector<std::vector<std::string>> t = {
      {"galaxy", "nebula", "quasar", "pulsar", "comet", "orbit", "telescope", "redshift", "supernova", "cosmic",
       "stellar", "planet"},
      {"sauce", "basil", "garlic", "butter", "dough", "simmer", "oven", "pastry", "whisk", "onion", "roasted",
       "pepper"},
      {"vessel", "cargo", "salvage", "tanker", "admiralty", "lading", "charter", "harbour", "towage", "freight",
       "mariner", "wharf"},
  };
  return t;
}

/// One document per topic. Sentences draw their content words only from that
/// topic's vocabulary, so topics share almost no character trigrams.
inline std::vector<ragsynth::Document> make_topic_corpus(std::uint64_t seed, std::size_t sentences = 12) {
  std::mt19937_64 rng(seed);
  std::vector<ragsynth::Document> docs;
  const char* names[] = {"astronomy", "cooking", "maritime_law"};
  for (std::size_t t = 0; t < topic_vocabulary().size(); ++t) {
    const auto& vocab = topic_vocabulary()[t];
    const auto word = [&] { return vocab[rng() % vocab.size()]; };
    std::string text;
    for (std::size_t i = 0; i < sentences; ++i) {
      if (!text.empty()) text += ' ';
      std::string s = word() + " " + word() + " and " + word() + " " + word() + " with " + word() + " " + word() + ".";
      s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
      text += s;
    }
    docs.push_back({names[t], std::string("topic:") + names[t], text});
  }
  return docs;
}

inline void write_documents(const std::filesystem::path& path, const std::vector<ragsynth::Document>& docs) {
  std::ofstream out(path);
  for (const auto& d : docs) out << nlohmann::json{{"id", d.id}, {"text", d.text}}.dump() << "\n";
}

// ---------------------------------------------------------------------------
// Providers for failure injection

/// Delegates to an inner provider but answers unparseable text for every QA
/// prompt whose passage hash selects it (hash % modulus == 0), repair included.
class FaultyChatProvider final : public ragsynth::ChatProvider {
 public:
  FaultyChatProvider(std::shared_ptr<const ragsynth::ChatProvider> inner, std::uint64_t salt, std::uint64_t modulus)
      : inner_(std::move(inner)), salt_(salt), modulus_(modulus) {}

  std::string id() const override { return "faulty:" + inner_->id(); }
  std::string model() const override { return inner_->model(); }

  bool selects(std::string_view passage) const {
    return modulus_ != 0 && ragsynth::hash::mix(ragsynth::hash::fnv1a(passage) ^ salt_) % modulus_ == 0;
  }

  ragsynth::ChatResponse complete(const ragsynth::ChatRequest& req) const override {
    const auto passage = ragsynth::prompts::payload(req.user_prompt, "PASSAGE");
    if (req.user_prompt.starts_with("TASK: qa_pairs") && selects(passage)) {
      return {"Sorry, here are some thoughts instead of JSON.", 0, 0, id()};
    }
    return inner_->complete(req);
  }

 private:
  std::shared_ptr<const ragsynth::ChatProvider> inner_;
  std::uint64_t salt_;
  std::uint64_t modulus_;
};

/// Replies with a fixed sequence of texts, then repeats the last one.
class ScriptedChatProvider final : public ragsynth::ChatProvider {
 public:
  explicit ScriptedChatProvider(std::vector<std::string> replies) : replies_(std::move(replies)) {}

  std::string id() const override { return "scripted"; }
  std::string model() const override { return "scripted-model"; }

  ragsynth::ChatResponse complete(const ragsynth::ChatRequest& req) const override {
    std::lock_guard lock(mu_);
    prompts_.push_back(req.user_prompt);
    const auto& text = replies_[std::min(calls_++, replies_.size() - 1)];
    return {text, 0, 0, id()};
  }

  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }
  std::vector<std::string> prompts() const {
    std::lock_guard lock(mu_);
    return prompts_;
  }

 private:
  std::vector<std::string> replies_;
  mutable std::mutex mu_;
  mutable std::size_t calls_ = 0;
  mutable std::vector<std::string> prompts_;
};

}  // namespace fixtures
