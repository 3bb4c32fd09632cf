#pragma once

// Versioned prompt templates. Every template starts its user prompt with a
// "TASK: <schema>" line and fences its payload between "<<<" and ">>>" lines;
// the mock provider keys off exactly these markers.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ragsynth::prompts {

inline constexpr std::string_view kQaVersion = "qa-v1";
inline constexpr std::string_view kDirPmptVersion = "dirpmpt-v1";
inline constexpr std::string_view kJudgeVersion = "judge-v1";
inline constexpr std::string_view kEntityVersion = "entities-v1";

inline constexpr std::string_view kOpenFence = "<<<\n";
inline constexpr std::string_view kCloseFence = "\n>>>";

struct Prompt {
  std::string system;
  std::string user;
};

inline std::string fenced(std::string_view label, std::string_view body) {
  std::string out(label);
  out += ":\n";
  out += kOpenFence;
  out += body;
  out += kCloseFence;
  out += '\n';
  return out;
}

inline Prompt qa_pairs(std::string_view passage, std::size_t count) {
  Prompt p;
  p.system =
      "You write question-answer pairs used as ground truth for evaluating "
      "retrieval-augmented generation systems.";
  p.user = "TASK: qa_pairs\nCOUNT: " + std::to_string(count) +
           "\n"
           "Write exactly COUNT question-answer pairs about the passage below.\n"
           "- Ground every answer strictly in the passage. Do not add outside facts.\n"
           "- Tokens of the form [TYPE_n] are opaque proper nouns. Copy them verbatim; "
           "never guess what they stand for.\n"
           "- Vary the question forms: factual, definitional, inferential.\n"
           "Reply with JSON only: {\"pairs\": [{\"question\": \"...\", \"answer\": \"...\"}]}\n" +
           fenced("PASSAGE", passage);
  return p;
}

inline Prompt dirpmpt_pairs(std::string_view document, std::size_t count) {
  Prompt p;
  p.system = "You write diverse question-answer pairs about a document.";
  p.user = "TASK: dirpmpt_pairs\nCOUNT: " + std::to_string(count) +
           "\n"
           "Write exactly COUNT diverse question-answer pairs about the document below.\n"
           "Examples of the expected style:\n"
           "Q: What obligation does the regulation place on providers of high-risk systems?\n"
           "A: They must establish a risk management system.\n"
           "Q: Which authority supervises compliance at the national level?\n"
           "A: The designated national supervisory authority.\n"
           "Q: Why are transparency duties imposed on chatbots?\n"
           "A: So that people know they are interacting with a machine.\n"
           "Reply with JSON only: {\"pairs\": [{\"question\": \"...\", \"answer\": \"...\"}]}\n" +
           fenced("DOCUMENT", document);
  return p;
}

inline Prompt judge_score(const std::vector<std::string>& questions) {
  Prompt p;
  p.system = "You are an expert evaluator of synthetic evaluation datasets.";
  std::string listing;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    if (i) listing += '\n';
    listing += std::to_string(i + 1) + ". " + questions[i];
  }
  p.user =
      "TASK: judge_score\n"
      "Rate the diversity of the question set below on a scale from 1 (all questions "
      "nearly the same) to 10 (maximally diverse). Judge three criteria together:\n"
      "- semantic variety: do the questions ask for different kinds of information?\n"
      "- topical coverage: how many distinct topics do they span?\n"
      "- phrasing differences: how varied are wording and question form?\n"
      "Reply with a single integer from 1 to 10 and nothing else.\n" +
      fenced("QUESTIONS", listing);
  return p;
}

inline Prompt entity_spans(std::string_view text, const std::vector<std::string>& types) {
  Prompt p;
  p.system = "You detect personal and sensitive entities in text.";
  std::string type_list;
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (i) type_list += ", ";
    type_list += types[i];
  }
  p.user = "TASK: entity_spans\nTYPES: " + type_list +
           "\n"
           "List every occurrence of an entity of the given types, copying its text exactly.\n"
           "Reply with JSON only: {\"entities\": [{\"type\": \"TYPE\", \"text\": \"...\"}]}\n" +
           fenced("TEXT", text);
  return p;
}

inline std::string repair_note(std::string_view error) {
  std::string out = "\n\nYour previous reply could not be used: ";
  out += error;
  out += "\nReply again using exactly the required format and nothing else.";
  return out;
}

/// Extracts the fenced payload under `label`, or empty if absent.
inline std::string_view payload(std::string_view user_prompt, std::string_view label) {
  std::string head(label);
  head += ":\n";
  head += kOpenFence;
  const auto start = user_prompt.find(head);
  if (start == std::string_view::npos) return {};
  const auto body = start + head.size();
  const auto end = user_prompt.find(kCloseFence, body);
  if (end == std::string_view::npos) return {};
  return user_prompt.substr(body, end - body);
}

}  // namespace ragsynth::prompts
