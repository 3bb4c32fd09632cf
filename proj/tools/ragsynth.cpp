// ragsynth command-line interface.
//
//   ragsynth generate         --input <corpus> --out <run dir> [--config f] [--seed n] [--provider mock|remote]
//   ragsynth resume           --out <run dir> [--config f]
//   ragsynth eval-privacy     --input <annotated.jsonl> [--out result.json] [--match-policy jaccard|exact]
//   ragsynth eval-diversity   --input <corpus> --size 10 [--size 50] [--mode pipeline|dirpmpt] [--out dir]
//   ragsynth build-paragraphs --input <annotated.jsonl> --out <paragraphs.jsonl> --group-size n
//
// Exit status: 0 success, 1 runtime failure (message names the stage), 2 usage error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ragsynth/ragsynth.hpp"

namespace fs = std::filesystem;
using namespace ragsynth;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string provider;
  std::string embedder;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file; flags override its values")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "random seed for clustering and mock providers");
  cmd->add_option("--provider", f.provider, "chat provider kind")->check(CLI::IsMember({"mock", "remote"}));
  cmd->add_option("--embedder", f.embedder, "embedding provider kind")->check(CLI::IsMember({"local", "remote"}));
}

PipelineConfig resolve_config(const CommonFlags& f) {
  PipelineConfig c = f.config.empty() ? PipelineConfig{} : PipelineConfig::from_file(f.config);
  if (f.seed) c.seed = *f.seed;
  if (!f.provider.empty()) c.chat.kind = f.provider;
  if (!f.embedder.empty()) c.embedding.kind = f.embedder;
  return c;
}

void print_artifacts(const RunResult& r) {
  if (!r.finished) {
    std::cout << "stopped after stage '" << r.state.completed.back() << "' (" << r.state.run_id << ")\n";
    return;
  }
  std::cout << r.state.run_id << "\n"
            << "  qa:             " << r.artifacts.qa.string() << "\n"
            << "  privacy report: " << r.artifacts.privacy_report.string() << "\n"
            << "  qa report:      " << r.artifacts.qa_report.string() << "\n";
}

std::string privacy_table(const MaskingEvaluation& ev) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-18s %6s %8s %6s %6s %8s\n", "type", "gold", "detected", "missed", "masked",
                "accuracy");
  out += buf;
  auto line = [&](const std::string& name, const TypeAccuracy& t) {
    std::snprintf(buf, sizeof buf, "%-18s %6zu %8zu %6zu %6zu %8.4f\n", name.c_str(), t.gold, t.detected, t.missed,
                  t.masked, t.accuracy());
    out += buf;
  };
  for (const auto& [t, a] : ev.per_type) line(t, a);
  line("OVERALL", ev.overall);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diverse, privacy-preserving synthetic QA dataset generation for RAG evaluation"};
  app.require_subcommand(1);

  CommonFlags gen_flags;
  std::string gen_input;
  std::string gen_out;
  std::string stop_after;
  auto* gen = app.add_subcommand("generate", "run the full pipeline on a corpus");
  gen->add_option("--input", gen_input, "text file, JSONL of {id,text}, or directory")->required();
  gen->add_option("--out", gen_out, "run directory")->required();
  gen->add_option("--stop-after", stop_after, "stop once this stage completes")
      ->check(CLI::IsMember({"ingest", "embed", "cluster", "mask", "qa"}));
  add_common(gen, gen_flags);

  CommonFlags res_flags;
  std::string res_out;
  auto* res = app.add_subcommand("resume", "continue an interrupted run");
  res->add_option("--out", res_out, "run directory")->required()->check(CLI::ExistingDirectory);
  add_common(res, res_flags);

  CommonFlags ep_flags;
  std::string ep_input;
  std::string ep_out = "privacy_eval.json";
  std::string ep_policy = "jaccard";
  double ep_threshold = 0.5;
  std::vector<std::string> ep_detectors;
  auto* ep = app.add_subcommand("eval-privacy", "per-type masking accuracy on an annotated dataset");
  ep->add_option("--input", ep_input, "annotated JSONL {text, spans}")->required();
  ep->add_option("--out", ep_out, "result JSON file");
  ep->add_option("--match-policy", ep_policy)->check(CLI::IsMember({"jaccard", "exact"}));
  ep->add_option("--threshold", ep_threshold, "Jaccard threshold");
  ep->add_option("--detectors", ep_detectors, "detector ids (regex, gazetteer, keyword, llm)");
  add_common(ep, ep_flags);

  CommonFlags ed_flags;
  std::string ed_input;
  std::string ed_out = ".";
  std::vector<std::size_t> ed_sizes;
  std::vector<std::string> ed_modes;
  std::string ed_judge;
  auto* ed = app.add_subcommand("eval-diversity", "compare question-set diversity across generators");
  ed->add_option("--input", ed_input, "corpus (same forms as generate)")->required();
  ed->add_option("--size", ed_sizes, "question set size (repeatable)")->required();
  ed->add_option("--mode", ed_modes, "generator mode (repeatable)")->check(CLI::IsMember({"pipeline", "dirpmpt"}));
  ed->add_option("--judge", ed_judge, "judge provider kind")->check(CLI::IsMember({"mock", "remote", "none"}));
  ed->add_option("--out", ed_out, "directory for comparison.json and comparison.txt");
  add_common(ed, ed_flags);

  std::string bp_input;
  std::string bp_out;
  std::size_t bp_group = 1;
  std::string bp_sep = " ";
  auto* bp = app.add_subcommand("build-paragraphs", "concatenate annotated records into paragraphs");
  bp->add_option("--input", bp_input, "annotated JSONL")->required();
  bp->add_option("--out", bp_out, "output JSONL")->required();
  bp->add_option("--group-size", bp_group, "records per paragraph")->check(CLI::PositiveNumber);
  bp->add_option("--separator", bp_sep, "text inserted between records");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  }

  std::string stage = "cli";
  try {
    if (*gen) {
      stage = "generate";
      RunOptions opts;
      if (!stop_after.empty()) opts.stop_after = stop_after;
      print_artifacts(run_pipeline(resolve_config(gen_flags), gen_input, gen_out, opts));
    } else if (*res) {
      stage = "resume";
      std::optional<PipelineConfig> cfg;
      if (!res_flags.config.empty() || res_flags.seed || !res_flags.provider.empty() || !res_flags.embedder.empty()) {
        CommonFlags f = res_flags;
        PipelineConfig base = f.config.empty() ? PipelineConfig::from_file(fs::path(res_out) / "config.resolved")
                                               : PipelineConfig::from_file(f.config);
        if (f.seed) base.seed = *f.seed;
        if (!f.provider.empty()) base.chat.kind = f.provider;
        if (!f.embedder.empty()) base.embedding.kind = f.embedder;
        cfg = base;
      }
      print_artifacts(resume(res_out, cfg));
    } else if (*ep) {
      stage = "eval-privacy";
      auto cfg = resolve_config(ep_flags);
      if (!ep_detectors.empty()) cfg.detectors = ep_detectors;
      const auto records = load_annotated_dataset(ep_input);
      const MatchPolicy policy{ep_policy == "exact" ? MatchPolicy::Kind::exact : MatchPolicy::Kind::jaccard,
                               ep_threshold};
      const auto detectors = make_detectors(cfg, make_chat(cfg.chat, cfg.seed));
      const auto ev = evaluate_masking(records, detectors, policy, cfg.workers);
      auto j = ev.to_json();
      const auto stats = dataset_stats(records);
      j["dataset"] = {{"records", stats.records},
                      {"entities", stats.entities},
                      {"entities_per_record", stats.entities_per_record}};
      j["detector_set"] = detector_ids(detectors);
      io::write_file(ep_out, j.dump(2) + "\n");
      std::cout << privacy_table(ev);
    } else if (*ed) {
      stage = "eval-diversity";
      auto cfg = resolve_config(ed_flags);
      if (!ed_judge.empty()) {
        cfg.judge.kind = ed_judge;
      } else if (cfg.judge.kind == "none") {
        cfg.judge.kind = cfg.chat.kind;
      }
      if (ed_modes.empty()) ed_modes = {"pipeline", "dirpmpt"};
      const auto corpus = load_corpus(ed_input);
      ComparisonProviders p;
      p.clustering_embedder = make_embedder(cfg);
      p.metric_embedder = p.clustering_embedder;
      p.generator = make_chat(cfg.chat, cfg.seed);
      p.judge = make_chat(cfg.judge, cfg.seed);
      p.detectors = make_detectors(cfg, p.generator);
      ComparisonSettings s{cfg.chunk_size, cfg.k_min, cfg.k_max, cfg.seed, cfg.max_iter, cfg.normalize_embeddings};
      const auto table = compare_generators(corpus, ed_sizes, ed_modes, p, s);
      io::write_file(fs::path(ed_out) / "comparison.json", table.to_json().dump(2) + "\n");
      io::write_file(fs::path(ed_out) / "comparison.txt", table.to_text());
      std::cout << table.to_text();
      if (table.has_errors()) {
        std::cerr << "error: eval-diversity: some cells failed; see comparison.json\n";
        return 1;
      }
    } else if (*bp) {
      stage = "build-paragraphs";
      const auto paragraphs = build_privacy_paragraphs(load_annotated_dataset(bp_input), bp_group, bp_sep);
      std::vector<nlohmann::ordered_json> rows;
      for (const auto& p : paragraphs) rows.push_back(to_json(p));
      io::write_file(bp_out, io::to_jsonl(rows));
      const auto stats = dataset_stats(paragraphs);
      std::cout << stats.records << " paragraphs, " << stats.entities << " entities ("
                << stats.entities_per_record << " per paragraph)\n";
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << stage << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
