#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nestrank/oracle.hpp"
#include "nestrank/pipeline.hpp"
#include "nestrank/presets.hpp"

namespace nestrank::cli {

namespace fs = std::filesystem;

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write file: " + path);
  f << content;
}

inline std::string sanitize_filename(const std::string& id) {
  std::string out;
  bool prev_us = false;
  for (char c : id) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += c;
      prev_us = false;
    } else if (!prev_us) {
      out += '_';
      prev_us = true;
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "variant" : out;
}

struct NestSource {
  std::string nest_file;
  std::string preset_spec;

  LoopNest load(ConvPreset* preset_out = nullptr) const {
    if (!nest_file.empty() && !preset_spec.empty())
      throw ConfigRejectedError("use either --nest or --preset, not both");
    if (!nest_file.empty()) return parse_nest(read_file(nest_file));
    if (!preset_spec.empty()) {
      if (preset_spec.rfind("conv:", 0) != 0)
        throw ConfigRejectedError("unknown preset '" + preset_spec + "' (expected conv:<10 ints>)");
      ConvPreset p = ConvPreset::parse(preset_spec.substr(5));
      if (preset_out) *preset_out = p;
      return p.build();
    }
    throw ConfigRejectedError("a nest is required: pass --nest FILE or --preset conv:<10 ints>");
  }

  bool is_preset() const { return !preset_spec.empty(); }
};

inline MachineDescriptor load_machine(const std::string& machine_file) {
  if (machine_file.empty()) return MachineDescriptor::cascade_lake_default();
  return MachineDescriptor::load(machine_file);
}

// Returns the process exit status: 0 ok, 1 analysis error, 2 input/config
// error.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"loop-nest working-set analysis and variant ranking"};
  app.require_subcommand(1);

  NestSource src;
  std::string machine_file;
  std::string format = "text";
  std::string variants_file;
  std::string ranker_name = "cost";
  std::string weights_file;
  std::string out_dir = "out";
  std::string recipe_text;
  std::string dataset_file;
  std::string out_file;
  int top_k = 1;
  double split = 0.7;
  int epochs = 200;
  double learning_rate = 0.05;
  int batch_size = 32;
  std::uint64_t seed = 42;
  std::int64_t max_points = 1000000;

  auto add_nest_flags = [&](CLI::App* cmd) {
    cmd->add_option("--nest", src.nest_file, "nest description file");
    cmd->add_option("--preset", src.preset_spec, "built-in nest, e.g. conv:2,32,32,4,4,3,3,1,1,16");
  };
  auto add_format_flag = [&](CLI::App* cmd) {
    cmd->add_option("--format", format, "text|rows")->check(CLI::IsMember({"text", "rows"}));
  };

  bool dump_relations = false;
  CLI::App* analyze = app.add_subcommand("analyze", "working sets, cache fit and cost of a nest");
  add_nest_flags(analyze);
  analyze->add_option("--machine", machine_file, "machine description file");
  analyze->add_flag("--relations", dump_relations, "dump dependence relations in set notation");
  add_format_flag(analyze);

  CLI::App* rank = app.add_subcommand("rank", "generate, analyze and rank variants");
  add_nest_flags(rank);
  rank->add_option("--machine", machine_file, "machine description file");
  rank->add_option("--variants", variants_file, "variant config file");
  rank->add_option("--ranker", ranker_name, "cost|dnn")->check(CLI::IsMember({"cost", "dnn"}));
  rank->add_option("--weights", weights_file, "weights file (dnn ranker)");
  rank->add_option("--top-k", top_k, "emit the k best variants")->check(CLI::PositiveNumber);
  rank->add_option("--out", out_dir, "output directory for report and emitted sources");
  add_format_flag(rank);

  CLI::App* train = app.add_subcommand("train", "train the pairwise ranker");
  train->add_option("--dataset", dataset_file, "training rows")->required();
  train->add_option("--weights", weights_file, "output weights file")->required();
  train->add_option("--split", split, "training fraction (rest held out)");
  train->add_option("--epochs", epochs, "training epochs");
  train->add_option("--lr", learning_rate, "learning rate");
  train->add_option("--batch", batch_size, "mini-batch size")->check(CLI::PositiveNumber);
  train->add_option("--seed", seed, "rng seed");

  CLI::App* emit = app.add_subcommand("emit", "emit one variant as source");
  add_nest_flags(emit);
  emit->add_option("--recipe", recipe_text, "variant recipe, e.g. perm=k,j,i;tile=j:2");
  emit->add_option("--out", out_file, "output file (default: stdout)");

  CLI::App* oracle = app.add_subcommand("oracle-check",
                                        "compare the analysis against brute-force enumeration");
  add_nest_flags(oracle);
  oracle->add_option("--machine", machine_file, "machine description file");
  oracle->add_option("--recipe", recipe_text, "check one transformed variant instead");
  oracle->add_option("--max-points", max_points, "iteration-space limit for enumeration");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*analyze) {
      LoopNest nest = src.load();
      MachineDescriptor machine = load_machine(machine_file);
      NestAnalysis a = analyze_nest(nest, machine);
      out << analyze_report(a, machine, format == "rows");
      if (dump_relations && format != "rows") {
        out << "dependence relations:\n";
        for (const Dependence& d : a.deps)
          out << "  " << d.label() << " = " << d.rel.debug_string() << "\n";
      }
      return 0;
    }

    if (*rank) {
      ConvPreset preset;
      bool have_preset = src.is_preset();
      LoopNest nest = src.load(&preset);
      MachineDescriptor machine = load_machine(machine_file);

      VariantConfig cfg;
      if (!variants_file.empty())
        cfg = parse_variant_config(read_file(variants_file), nest);
      else if (have_preset)
        cfg = preset.default_variant_config(nest);
      else
        cfg = default_variant_config(nest);

      RankerKind kind = ranker_name == "dnn" ? RankerKind::DNN : RankerKind::COST;
      PairwiseRanker net;
      const PairwiseRanker* net_ptr = nullptr;
      if (kind == RankerKind::DNN) {
        if (weights_file.empty())
          throw MissingWeightsError("--ranker dnn requires --weights");
        net = PairwiseRanker::load(weights_file);
        net_ptr = &net;
      }

      RankOutcome outcome = rank_variants(nest, machine, cfg, kind, net_ptr);
      std::string report = rank_report(outcome, machine, format == "rows");

      fs::create_directories(out_dir);
      std::ostringstream emitted;
      std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_k), outcome.ranked.size());
      for (std::size_t r = 0; r < k; ++r) {
        const std::string& id = outcome.ranked[r];
        const VariantAnalysis* v = nullptr;
        for (const VariantAnalysis& cand : outcome.variants)
          if (cand.id == id) { v = &cand; break; }
        std::string name = "rank" + std::to_string(r + 1) + "_" + sanitize_filename(id) + ".c";
        write_file((fs::path(out_dir) / name).string(), emit_source(v->nest));
        emitted << (format == "rows" ? "emitted\t" + std::to_string(r + 1) + "\t" + name
                                     : "emitted " + std::to_string(r + 1) + ": " + name)
                << "\n";
      }
      report += emitted.str();
      write_file((fs::path(out_dir) / (format == "rows" ? "report.rows" : "report.txt")).string(),
                 report);
      out << report;
      return 0;
    }

    if (*train) {
      std::vector<TrainPair> rows = parse_dataset(read_file(dataset_file));
      TrainReport rep = train_with_holdout(rows, split, epochs, learning_rate, seed, batch_size);
      rep.net.save(weights_file);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.4f", rep.train_accuracy);
      out << "rows: " << rows.size() << " (train " << rep.train_rows << ", held-out "
          << rep.holdout_rows << ")\n";
      out << "train accuracy: " << buf << "\n";
      if (rep.has_holdout) {
        std::snprintf(buf, sizeof buf, "%.4f", rep.holdout_accuracy);
        out << "held-out accuracy: " << buf << "\n";
      } else {
        out << "held-out accuracy: n/a (no held-out rows)\n";
      }
      out << "weights: " << weights_file << "\n";
      return 0;
    }

    if (*emit) {
      LoopNest nest = src.load();
      LoopNest variant = recipe_text.empty()
                             ? nest
                             : apply_recipe(nest, VariantRecipe::parse(recipe_text));
      std::string source = emit_source(variant);
      if (out_file.empty()) out << source;
      else write_file(out_file, source);
      return 0;
    }

    if (*oracle) {
      LoopNest nest = src.load();
      if (!recipe_text.empty()) nest = apply_recipe(nest, VariantRecipe::parse(recipe_text));
      MachineDescriptor machine = load_machine(machine_file);
      NestAnalysis a = analyze_nest(nest, machine);
      bool all_ok = true;
      out << "dependence working sets, analysis vs enumeration:\n";
      for (std::size_t i = 0; i < a.records.size(); ++i) {
        const WorkingSetRecord& r = a.records[i];
        std::int64_t oracle_min =
            enumerate_working_set(nest, a.deps[i], WorkingSetBound::MIN, max_points);
        std::int64_t oracle_max =
            enumerate_working_set(nest, a.deps[i], WorkingSetBound::MAX, max_points);
        bool ok = oracle_min == r.ws_min && oracle_max == r.ws_max;
        all_ok &= ok;
        out << "  " << r.dep_id << " " << dep_kind_name(r.kind) << " " << r.array << ": analysis ("
            << r.ws_min << ", " << r.ws_max << ") enumeration (" << oracle_min << ", "
            << oracle_max << ") " << (ok ? "match" : "MISMATCH") << "\n";
      }
      out << "analytical placement (elements per level):";
      for (std::size_t i = 0; i < a.fit.per_level_ws.size(); ++i)
        out << "  " << machine.levels[i].name << "=" << a.fit.per_level_ws[i];
      out << "  mem=" << a.fit.mem_ws << "\n";
      try {
        Trace tr = build_trace(nest, max_points);
        LruResult sim = lru_simulate(tr, machine);
        out << "LRU simulation (diagnostic only, non-binding; not used for ranking):\n";
        for (const LruLevelStats& l : sim.levels) {
          double ratio = l.hits + l.misses == 0
                             ? 0.0
                             : static_cast<double>(l.misses) /
                                   static_cast<double>(l.hits + l.misses);
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.4f", ratio);
          out << "  " << l.name << ": hits " << l.hits << ", misses " << l.misses
              << ", miss ratio " << buf << "\n";
        }
        out << "  memory accesses: " << sim.memory_accesses << "\n";
      } catch (const SpaceTooLargeError&) {
        out << "LRU simulation skipped: iteration space above --max-points\n";
      }
      out << (all_ok ? "oracle check passed\n" : "oracle check FAILED\n");
      return all_ok ? 0 : 1;
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NotSupportedError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const MalformedRowError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const EmptyDatasetError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const MissingWeightsError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigRejectedError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidPermutationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const TileSizeNonPositiveError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "analysis error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace nestrank::cli
