// factcloze: batch hallucination correction, corpus distillation, training
// data construction and report tabulation over JSON-lines files.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "factcloze/commands.hpp"

namespace fc = factcloze;

namespace {

fc::CorrectionMode mode_or_throw(const std::string& s) {
  auto m = fc::parse_mode(s);
  if (!m) throw fc::ConfigError("unknown mode '" + s + "' (expected slot or full)");
  return *m;
}

fc::AdapterSpec parse_adapter(const std::string& spec) {
  // name=command, optionally name[lo:hi]=command
  auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw fc::ConfigError("adapter must be given as name=command: " + spec);
  fc::AdapterSpec out;
  std::string name = spec.substr(0, eq);
  out.command = spec.substr(eq + 1);
  auto lb = name.find('[');
  if (lb != std::string::npos) {
    auto colon = name.find(':', lb);
    auto rb = name.find(']', lb);
    if (colon == std::string::npos || rb == std::string::npos || colon > rb)
      throw fc::ConfigError("bad adapter range in " + spec);
    try {
      out.range.lo = std::stod(name.substr(lb + 1, colon - lb - 1));
      out.range.hi = std::stod(name.substr(colon + 1, rb - colon - 1));
    } catch (const std::exception&) {
      throw fc::ConfigError("bad adapter range in " + spec);
    }
    name = name.substr(0, lb);
  }
  out.name = name;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Factual error correction and distillation toolkit"};
  app.require_subcommand(1);

  // correct ------------------------------------------------------------------
  fc::CorrectConfig cc;
  std::string cc_backend = "identity";
  std::string cc_mode = "slot";
  std::string cc_disposition = "flag";
  std::vector<std::string> cc_categories;
  bool cc_no_diagnosis = false;
  bool cc_serial = false;
  auto* correct = app.add_subcommand("correct", "Correct hypotheses against their documents");
  correct->add_option("--docs", cc.docs_path, "Documents JSONL")->required()->check(CLI::ExistingFile);
  correct->add_option("--hyps", cc.hypotheses_path, "Hypotheses JSONL")->required()->check(CLI::ExistingFile);
  correct->add_option("--out", cc.output_path, "Corrected records JSONL")->required();
  correct->add_option("--alerts", cc.alerts_path, "Alert records (separate-file disposition)");
  correct->add_option("--errors", cc.errors_path, "Record-level errors JSONL");
  correct->add_option("--backend", cc_backend, "identity, oracle or process")
      ->check(CLI::IsMember({"identity", "oracle", "process"}));
  correct->add_option("--backend-cmd", cc.backend_command, "Command for the process backend")
      ->envname("FACTCLOZE_BACKEND_CMD");
  correct->add_flag("--backend-serial", cc_serial, "Process backend cannot take concurrent calls");
  correct->add_option("--max-input-chars", cc.process_capabilities.max_input_chars,
                      "Process backend input limit");
  correct->add_option("--mode", cc_mode, "slot or full")->check(CLI::IsMember({"slot", "full"}));
  correct->add_flag("--no-self-diagnosis", cc_no_diagnosis, "Mask every factor in one pass");
  correct->add_flag("--alert-on-alignment-failure", cc.options.alert_on_alignment_failure);
  correct->add_option("--categories", cc_categories, "Factor categories to correct (default all)")
      ->delimiter(',');
  correct->add_option("--max-doc-chars", cc.options.max_doc_chars, "Document budget per request")
      ->check(CLI::PositiveNumber);
  correct->add_option("--workers", cc.workers, "Worker threads")->check(CLI::PositiveNumber);
  correct->add_option("--alert-disposition", cc_disposition, "flag, drop or separate-file")
      ->check(CLI::IsMember({"flag", "drop", "separate-file"}));

  // distill ------------------------------------------------------------------
  fc::DistillConfig dc;
  std::string dc_scores;
  std::string dc_thresholds;
  std::string dc_preset = "cnn_dm";
  std::vector<std::string> dc_adapters;
  auto* distill = app.add_subcommand("distill", "Filter scored pairs into base and alert sets");
  distill->add_option("--docs", dc.docs_path, "Documents JSONL")->required()->check(CLI::ExistingFile);
  distill->add_option("--pairs", dc.pairs_path, "Pairs JSONL")->required()->check(CLI::ExistingFile);
  distill->add_option("--scores", dc_scores, "Precomputed scores JSONL")->check(CLI::ExistingFile);
  distill->add_option("--adapter", dc_adapters, "Metric adapter name=command (repeatable)");
  auto* th_opt = distill->add_option("--thresholds", dc_thresholds, "Thresholds file")
                     ->check(CLI::ExistingFile);
  distill->add_option("--preset", dc_preset, "cnn_dm or xsum")
      ->check(CLI::IsMember({"cnn_dm", "xsum"}))
      ->excludes(th_opt);
  distill->add_option("--out-dir", dc.out_dir, "Output directory")->required();
  distill->add_option("--workers", dc.workers, "Worker threads")->check(CLI::PositiveNumber);

  // build-train --------------------------------------------------------------
  fc::BuildTrainConfig bc;
  std::string bc_alert;
  std::string bc_mode = "slot";
  auto* build = app.add_subcommand("build-train", "Build cloze training examples");
  build->add_option("--docs", bc.docs_path, "Documents JSONL")->required()->check(CLI::ExistingFile);
  build->add_option("--base", bc.base_path, "Base set JSONL")->required()->check(CLI::ExistingFile);
  build->add_option("--alert", bc_alert, "Alert set JSONL")->check(CLI::ExistingFile);
  build->add_option("--out", bc.output_path, "Training examples JSONL")->required();
  build->add_option("--mask-rate", bc.options.mask_rate, "Fraction of factors masked")
      ->check(CLI::Range(0.0, 1.0));
  build->add_option("--seed", bc.options.seed, "Corpus seed (default 0)");
  build->add_option("--mode", bc_mode, "slot or full")->check(CLI::IsMember({"slot", "full"}));
  build->add_option("--alert-ratio", bc.alert_ratio, "Fraction of alert records used")
      ->check(CLI::Range(0.0, 1.0));
  build->add_option("--max-doc-chars", bc.options.max_doc_chars)->check(CLI::PositiveNumber);
  build->add_option("--workers", bc.workers, "Worker threads")->check(CLI::PositiveNumber);

  // report -------------------------------------------------------------------
  std::string rp_scores, rp_labels, rp_out, rp_anchor;
  std::size_t rp_bins = 5;
  auto* report = app.add_subcommand("report", "Tabulate scored samples as CSV");
  report->require_subcommand(1);
  auto* averages = report->add_subcommand("averages", "Mean score per error type");
  averages->add_option("--scores", rp_scores, "Scores JSONL")->required()->check(CLI::ExistingFile);
  averages->add_option("--labels", rp_labels, "Labels JSONL")->required()->check(CLI::ExistingFile);
  averages->add_option("--out", rp_out, "CSV output (default stdout)");
  auto* bins = report->add_subcommand("bins", "Box statistics per percentile bin");
  bins->add_option("--scores", rp_scores, "Scores JSONL")->required()->check(CLI::ExistingFile);
  bins->add_option("--anchor", rp_anchor, "Metric used for binning")->required();
  bins->add_option("--bins", rp_bins, "Number of bins");
  bins->add_option("--out", rp_out, "CSV output (default stdout)");

  // rouge2p ------------------------------------------------------------------
  std::string rg_candidate, rg_reference;
  auto* rouge = app.add_subcommand("rouge2p", "ROUGE-2 precision of a candidate against a reference");
  rouge->add_option("candidate", rg_candidate)->required();
  rouge->add_option("reference", rg_reference)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*correct) {
      cc.backend = *fc::parse_backend_kind(cc_backend);
      cc.disposition = *fc::parse_disposition(cc_disposition);
      cc.options.mode = mode_or_throw(cc_mode);
      cc.options.self_diagnosis = !cc_no_diagnosis;
      cc.process_capabilities.supports_concurrent_calls = !cc_serial;
      if (!cc_categories.empty()) {
        cc.options.factor_categories.clear();
        for (const auto& c : cc_categories) {
          auto t = fc::parse_factor_type(c);
          if (!t) throw fc::ConfigError("unknown factor category '" + c + "'");
          cc.options.factor_categories.insert(*t);
        }
      }
      auto summary = fc::cmd_correct(cc);
      std::cout << summary.to_json().dump() << '\n';
    } else if (*distill) {
      if (!dc_scores.empty()) dc.scores_path = dc_scores;
      for (const auto& a : dc_adapters) dc.adapters.push_back(parse_adapter(a));
      if (!dc_thresholds.empty()) dc.thresholds = fc::load_thresholds(dc_thresholds);
      else dc.thresholds = dc_preset == "xsum" ? fc::xsum_thresholds() : fc::cnn_dm_thresholds();
      auto summary = fc::cmd_distill(dc);
      std::cout << summary.to_json().dump() << '\n';
    } else if (*build) {
      if (!bc_alert.empty()) bc.alert_path = bc_alert;
      bc.options.mode = mode_or_throw(bc_mode);
      auto summary = fc::cmd_build_train(bc);
      std::cout << summary.to_json().dump() << '\n';
    } else if (*report) {
      std::string csv;
      if (*averages) {
        auto samples = fc::load_samples(rp_scores, rp_labels);
        csv = fc::error_type_csv(fc::report_error_type_averages(samples));
      } else {
        auto samples = fc::load_samples(rp_scores, std::nullopt);
        csv = fc::percentile_bins_csv(fc::report_percentile_bins(samples, rp_anchor, rp_bins));
      }
      if (rp_out.empty()) std::cout << csv;
      else fc::io::write_file(rp_out, csv);
    } else if (*rouge) {
      std::cout << fc::io::format_double(fc::rouge2_precision(rg_candidate, rg_reference)) << '\n';
    }
  } catch (const fc::ValidationError& e) {
    std::cerr << "factcloze: validation error: " << e.what() << '\n';
    return 3;
  } catch (const fc::ConfigError& e) {
    std::cerr << "factcloze: config error: " << e.what() << '\n';
    return 2;
  } catch (const fc::IoError& e) {
    std::cerr << "factcloze: I/O error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "factcloze: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
