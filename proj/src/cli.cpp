/*
 * Copyright 2026 The kbudget Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "kbudget/cli.hpp"

#include "kbudget/data.hpp"
#include "kbudget/io.hpp"
#include "kbudget/report.hpp"
#include "kbudget/sampling.hpp"
#include "kbudget/search.hpp"
#include "kbudget/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

namespace kbudget::cli {

namespace {

struct ArchFlags {
  Index blocks = 4, convs = 4, growth = 16, base = 32;

  void add_to(CLI::App* app) {
    app->add_option("--blocks", blocks, "Residual dense blocks (D)")->capture_default_str();
    app->add_option("--convs", convs, "Convolutions per block (C)")->capture_default_str();
    app->add_option("--growth", growth, "Growth channels (G)")->capture_default_str();
    app->add_option("--base", base, "Base feature channels (G0)")->capture_default_str();
  }

  ArchConfig arch(Index channels) const {
    ArchConfig a{blocks, convs, growth, base, channels, channels};
    a.validate();
    return a;
  }
};

struct TrainFlags {
  std::string data, val, out, mask = "lowpass";
  Index epochs = 20, batch = 4;
  double k = 8.0, lr = 1e-4, beta1 = 0.5;
  std::uint64_t seed = 0;

  void add_to(CLI::App* app, bool with_k) {
    app->add_option("--data", data, "Training set (MSV)")->required();
    app->add_option("--val", val, "Validation set (MSV)")->required();
    app->add_option("--out", out, "Output model path")->required();
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app->add_option("--batch-size", batch, "Examples per optimizer step")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--beta1", beta1, "Adam first-moment decay")->capture_default_str();
    app->add_option("--seed", seed, "Seed for every random draw")->capture_default_str();
    app->add_option("--mask", mask, "Mask kind: lowpass | random")->capture_default_str();
    if (with_k) app->add_option("--k", k, "Maximum undersampling factor")->capture_default_str();
  }

  TrainConfig config(std::ostream& out) const {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch;
    c.adam.lr = lr;
    c.adam.beta1 = beta1;
    c.max_factor = k;
    c.mask_kind = parse_mask_kind(mask);
    c.seed = seed;
    c.on_epoch = [&out](const EpochLog& log) {
      out << "epoch " << log.epoch << " train_loss " << format_number(log.train_loss) << " val_loss "
          << format_number(log.val_loss) << " (" << std::fixed << std::setprecision(1) << log.seconds << "s)\n"
          << std::defaultfloat << std::flush;
    };
    c.validate();
    return c;
  }
};

std::filesystem::path report_path(const std::filesystem::path& model_path) {
  return std::filesystem::path(model_path.string() + ".report.csv");
}

void write_model_and_report(const RecoveryModel& model, const TrainReport& report,
                            const std::filesystem::path& path, std::ostream& out) {
  save_model(model, path);
  io::write_file(report_path(path), to_csv(train_report_table(report)));
  out << "wrote " << path.string() << " (best epoch " << report.best_epoch << ", val_loss "
      << format_number(report.best_epoch == 0 ? report.initial_val_loss
                                              : report.val_loss[static_cast<std::size_t>(report.best_epoch - 1)])
      << ")\n";
}

Dataset load_dataset(const std::string& path, SplitTag tag) { return read_msv(path, tag); }

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

SamplingStrategy parse_strategy(const std::string& text, Index num_lines, MaskKind kind, double k) {
  return make_strategy(parse_factors(text), num_lines, kind, k);
}

std::vector<FactorGrid> parse_grids(const std::string& spec, Index free_factors) {
  std::vector<FactorGrid> grids;
  if (spec.empty()) {
    grids.assign(static_cast<std::size_t>(free_factors), default_grid());
    return grids;
  }
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string part; std::getline(ss, part, ';');) parts.push_back(part);
  if (parts.size() == 1) {
    grids.assign(static_cast<std::size_t>(free_factors), parse_grid_spec(parts.front()));
  } else {
    if (static_cast<Index>(parts.size()) != free_factors)
      throw ArgumentError("--grid lists " + std::to_string(parts.size()) + " specs for " +
                          std::to_string(free_factors) + " free factors");
    for (const auto& p : parts) grids.push_back(parse_grid_spec(p));
  }
  return grids;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InfeasibleBudgetError*>(&e)) return kInfeasible;
  if (dynamic_cast<const NumericError*>(&e)) return kNumeric;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return kIo;
  return kUsage;
}

}  // namespace

std::filesystem::path siso_model_path(const std::filesystem::path& base, Index s) {
  return std::filesystem::path(base.string() + ".s" + std::to_string(s + 1));
}

Recoverer load_recoverer(const std::string& path) {
  if (path == "zero-fill") return ZeroFill{};
  if (std::filesystem::is_regular_file(path)) return load_model(path);
  SisoSuite suite;
  for (Index s = 0; std::filesystem::is_regular_file(siso_model_path(path, s)); ++s)
    suite.models.push_back(load_model(siso_model_path(path, s)));
  if (suite.models.empty()) throw IoError(path + ": no model file (or SISO suite " + path + ".s1, ...)");
  for (const auto& m : suite.models)
    if (m.arch.in_channels != 1) throw FormatError(path + ": SISO suite member has more than one channel");
  return suite;
}

std::vector<std::string> apply_config_overlay(std::vector<std::string> args) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ArgumentError("--config needs a file path");
      config_path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
    if (args[i].starts_with("--config=")) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (config_path.empty()) return args;

  const std::string text = io::read_file(config_path);
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ArgumentError(config_path + ":" + std::to_string(number) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.starts_with(flag + "=");
    });
    if (!given) {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Budget-constrained multi-sequence MR undersampling search"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");

  // gen-data
  struct {
    std::string out, split, preview_dir;
    Index stacks = 200, size = 64, sequences = 3, ellipses = 8;
    std::uint64_t seed = 0;
  } gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic multi-sequence phantom dataset");
  gen_cmd->add_option("--out", gen.out, "Output MSV file")->required();
  gen_cmd->add_option("--stacks", gen.stacks, "Number of stacks")->capture_default_str();
  gen_cmd->add_option("--size", gen.size, "Image size H = W (even, >= 8)")->capture_default_str();
  gen_cmd->add_option("--sequences", gen.sequences, "Sequences per stack")->capture_default_str();
  gen_cmd->add_option("--ellipses", gen.ellipses, "Inner ellipses per stack")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--split", gen.split, "Also write train/val/test files, e.g. 0.85,0.05,0.10");
  gen_cmd->add_option("--preview-dir", gen.preview_dir, "Write PGM previews of the first stack here");

  // train-brm
  TrainFlags brm;
  ArchFlags brm_arch;
  std::string brm_mode = "mimo";
  auto* brm_cmd = app.add_subcommand("train-brm", "Train a blind recovery model over random undersampling");
  brm.add_to(brm_cmd, true);
  brm_arch.add_to(brm_cmd);
  brm_cmd->add_option("--mode", brm_mode, "mimo | siso")->capture_default_str();

  // train-dedicated
  TrainFlags ded;
  ArchFlags ded_arch;
  std::string ded_strategy;
  auto* ded_cmd = app.add_subcommand("train-dedicated", "Train a fresh model for one fixed strategy");
  ded.add_to(ded_cmd, true);
  ded_arch.add_to(ded_cmd);
  ded_cmd->add_option("--strategy", ded_strategy, "Comma-separated factors, e.g. 2.90,2.44,7.82")->required();

  // finetune
  TrainFlags fine;
  std::string fine_model, fine_strategy;
  auto* fine_cmd = app.add_subcommand("finetune", "Refine a trained model on one strategy");
  fine.add_to(fine_cmd, true);
  fine_cmd->add_option("--model", fine_model, "Model to refine (file or SISO base path)")->required();
  fine_cmd->add_option("--strategy", fine_strategy, "Comma-separated factors")->required();

  // search
  struct {
    std::string model, val, times = "1,1,1", grid, mask = "lowpass", out;
    double budget_factor = 4.0, k = 8.0;
    std::size_t topk = 3;
    std::uint64_t seed = 0;
    unsigned threads = default_threads();
  } srch;
  auto* search_cmd = app.add_subcommand("search", "Rank budget-feasible strategies with a trained model");
  search_cmd->add_option("--model", srch.model, "Model file, SISO base path, or zero-fill")->required();
  search_cmd->add_option("--val", srch.val, "Evaluation set (MSV)")->required();
  search_cmd->add_option("--times", srch.times, "Per-line time of each sequence")->capture_default_str();
  search_cmd->add_option("--budget-factor", srch.budget_factor, "Overall acceleration")->capture_default_str();
  search_cmd->add_option("--grid", srch.grid, "lo:hi:count:log|lin, one spec or one per free factor (;)");
  search_cmd->add_option("--mask", srch.mask, "lowpass | random")->capture_default_str();
  search_cmd->add_option("--k", srch.k, "Maximum undersampling factor")->capture_default_str();
  search_cmd->add_option("--topk", srch.topk, "Entries to print")->capture_default_str();
  search_cmd->add_option("--seed", srch.seed, "Evaluation mask seed")->capture_default_str();
  search_cmd->add_option("--threads", srch.threads, "Worker threads")->capture_default_str();
  search_cmd->add_option("--out", srch.out, "Ranking CSV")->required();

  // evaluate
  struct {
    std::string model, strategy, data, report, mask = "lowpass";
    double k = 8.0;
    std::uint64_t seed = 0;
  } eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a model on one strategy");
  eval_cmd->add_option("--model", eval.model, "Model file, SISO base path, or zero-fill")->required();
  eval_cmd->add_option("--strategy", eval.strategy, "Comma-separated factors")->required();
  eval_cmd->add_option("--data", eval.data, "Evaluation set (MSV)")->required();
  eval_cmd->add_option("--report", eval.report, "Output CSV")->required();
  eval_cmd->add_option("--mask", eval.mask, "lowpass | random")->capture_default_str();
  eval_cmd->add_option("--k", eval.k, "Maximum undersampling factor")->capture_default_str();
  eval_cmd->add_option("--seed", eval.seed, "Evaluation mask seed")->capture_default_str();

  // plot
  struct {
    std::string ranking, x = "zf_psnr", y = "psnr", out;
    std::size_t topk = 3;
  } plot;
  auto* plot_cmd = app.add_subcommand("plot", "Scatter plot of a ranking CSV as SVG");
  plot_cmd->add_option("--ranking", plot.ranking, "Ranking CSV")->required();
  plot_cmd->add_option("--x", plot.x, "zf_psnr | cost | any ranking column")->capture_default_str();
  plot_cmd->add_option("--y", plot.y, "psnr | ssim | mean_l1 | any ranking column")->capture_default_str();
  plot_cmd->add_option("--topk", plot.topk, "Leading rows to highlight")->capture_default_str();
  plot_cmd->add_option("--out", plot.out, "Output SVG")->required();

  try {
    args = apply_config_overlay(std::move(args));
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }

  try {
    if (gen_cmd->parsed()) {
      PhantomConfig config{gen.stacks, gen.size, gen.sequences, gen.seed, gen.ellipses};
      if (gen.size < 8 || gen.size % 2 != 0)
        throw ArgumentError("--size must be even and >= 8, got " + std::to_string(gen.size));
      if (gen.stacks < 1) throw ArgumentError("--stacks must be >= 1");
      if (gen.sequences < 1) throw ArgumentError("--sequences must be >= 1");
      if (gen.ellipses < 0) throw ArgumentError("--ellipses must be >= 0");
      std::array<double, 3> fractions{};
      if (!gen.split.empty()) {
        const auto f = parse_factors(gen.split);
        if (f.size() != 3) throw ArgumentError("--split needs three fractions");
        std::copy(f.begin(), f.end(), fractions.begin());
      }

      const Dataset dataset = generate_phantom_dataset(config);
      write_msv(dataset, gen.out);
      out << "wrote " << dataset.size() << " stacks (" << dataset.num_sequences() << " x " << dataset.height()
          << " x " << dataset.width() << ") to " << gen.out << "\n";
      if (!gen.split.empty()) {
        const auto [train, val, test] = split_dataset(dataset, fractions, gen.seed);
        const std::filesystem::path base(gen.out);
        const auto sibling = [&base](const char* tag) {
          auto p = base;
          p.replace_extension(std::string(".") + tag + ".msv");
          return p;
        };
        write_msv(train, sibling("train"));
        write_msv(val, sibling("val"));
        write_msv(test, sibling("test"));
        out << "split " << train.size() << "/" << val.size() << "/" << test.size() << " into "
            << sibling("train").string() << ", " << sibling("val").string() << ", " << sibling("test").string()
            << "\n";
      }
      if (!gen.preview_dir.empty()) {
        std::filesystem::create_directories(gen.preview_dir);
        for (Index s = 0; s < dataset.num_sequences(); ++s)
          export_pgm(dataset.stacks.front(), s,
                     std::filesystem::path(gen.preview_dir) / ("stack0_s" + std::to_string(s + 1) + ".pgm"));
      }
      return kOk;
    }

    if (brm_cmd->parsed()) {
      if (brm_mode != "mimo" && brm_mode != "siso") throw ArgumentError("--mode must be mimo or siso");
      const TrainConfig config = brm.config(out);
      const Dataset train = load_dataset(brm.data, SplitTag::train);
      const Dataset val = load_dataset(brm.val, SplitTag::val);
      if (val.num_sequences() != train.num_sequences())
        throw ArgumentError("--data and --val differ in sequence count");
      if (brm_mode == "mimo") {
        const ArchConfig arch = brm_arch.arch(train.num_sequences());
        auto [model, report] = train_brm(build_model(arch, ModelMode::mimo, brm.seed), train, val, config);
        write_model_and_report(model, report, brm.out, out);
      } else {
        TrainConfig per = config;
        const ArchConfig arch = brm_arch.arch(1);
        for (Index s = 0; s < train.num_sequences(); ++s) {
          out << "sequence " << s + 1 << "/" << train.num_sequences() << "\n";
          per.seed = siso_seed(config.seed, s);
          auto [model, report] = train_brm(build_model(arch, ModelMode::siso, per.seed), train.select_sequence(s),
                                           val.select_sequence(s), per);
          write_model_and_report(model, report, siso_model_path(brm.out, s), out);
        }
      }
      return kOk;
    }

    if (ded_cmd->parsed()) {
      const TrainConfig config = ded.config(out);
      const Dataset train = load_dataset(ded.data, SplitTag::train);
      const Dataset val = load_dataset(ded.val, SplitTag::val);
      const SamplingStrategy strategy = parse_strategy(ded_strategy, train.height(), config.mask_kind, ded.k);
      if (strategy.num_sequences() != train.num_sequences())
        throw ArgumentError("--strategy has " + std::to_string(strategy.num_sequences()) + " factors for " +
                            std::to_string(train.num_sequences()) + " sequences");
      const ArchConfig arch = ded_arch.arch(train.num_sequences());
      auto [model, report] =
          train_dedicated(build_model(arch, ModelMode::mimo, ded.seed), strategy, train, val, config);
      write_model_and_report(model, report, ded.out, out);
      return kOk;
    }

    if (fine_cmd->parsed()) {
      const TrainConfig config = fine.config(out);
      const Dataset train = load_dataset(fine.data, SplitTag::train);
      const Dataset val = load_dataset(fine.val, SplitTag::val);
      const SamplingStrategy strategy = parse_strategy(fine_strategy, train.height(), config.mask_kind, fine.k);
      if (strategy.num_sequences() != train.num_sequences())
        throw ArgumentError("--strategy has " + std::to_string(strategy.num_sequences()) + " factors for " +
                            std::to_string(train.num_sequences()) + " sequences");
      const Recoverer base = load_recoverer(fine_model);
      if (const auto* model = std::get_if<RecoveryModel>(&base)) {
        auto [tuned, report] = train_dedicated(*model, strategy, train, val, config);
        write_model_and_report(tuned, report, fine.out, out);
      } else if (const auto* suite = std::get_if<SisoSuite>(&base)) {
        if (static_cast<Index>(suite->models.size()) != train.num_sequences())
          throw ArgumentError("SISO suite size does not match the sequence count");
        for (Index s = 0; s < train.num_sequences(); ++s) {
          const auto i = static_cast<std::size_t>(s);
          const SamplingStrategy single =
              make_strategy({strategy.factors[i]}, train.height(), strategy.mask_kind, fine.k);
          TrainConfig per = config;
          per.seed = siso_seed(config.seed, s);
          auto [tuned, report] =
              train_dedicated(suite->models[i], single, train.select_sequence(s), val.select_sequence(s), per);
          write_model_and_report(tuned, report, siso_model_path(fine.out, s), out);
        }
      } else {
        throw ArgumentError("the zero-fill baseline has no parameters to fine-tune");
      }
      return kOk;
    }

    if (search_cmd->parsed()) {
      const TimeModel time_model(parse_factors(srch.times));
      const TimeBudget budget(srch.budget_factor);
      const MaskKind kind = parse_mask_kind(srch.mask);
      const Recoverer recoverer = load_recoverer(srch.model);
      const Dataset val = load_dataset(srch.val, SplitTag::val);
      const Index channels = input_channels(recoverer);
      if (time_model.num_sequences() != val.num_sequences() || (channels != 0 && channels != val.num_sequences()))
        throw ArgumentError("times length mismatch: " + std::to_string(time_model.num_sequences()) +
                            " times for " + std::to_string(channels != 0 ? channels : val.num_sequences()) +
                            " sequences");
      if (srch.topk < 1) throw ArgumentError("--topk must be >= 1");
      const auto grids = parse_grids(srch.grid, time_model.num_sequences() - 1);
      for (const auto& g : grids)
        for (double v : g)
          if (v > srch.k) throw ArgumentError("--grid value exceeds --k");
      const auto candidates =
          enumerate_simplex_strategies(grids, time_model, budget, srch.k, val.height(), kind);
      if (candidates.empty())
        throw InfeasibleBudgetError("infeasible budget: no grid point reaches the budget simplex");
      out << candidates.size() << " candidate strategies on the budget simplex\n";
      const Ranking ranking = search_strategies(recoverer, val, candidates, time_model, budget, srch.seed,
                                                srch.threads);
      io::write_file(srch.out, to_csv(ranking_table(ranking)));
      for (const auto& e : top_k(ranking, srch.topk))
        out << "lambda=(" << format_factors(e.strategy.factors) << ") cost " << format_number(e.cost)
            << " mean_l1 " << format_number(e.mean_l1) << " psnr " << format_number(e.psnr) << " ssim "
            << format_number(e.ssim) << "\n";
      return kOk;
    }

    if (eval_cmd->parsed()) {
      const Recoverer recoverer = load_recoverer(eval.model);
      const Dataset data = load_dataset(eval.data, SplitTag::test);
      const SamplingStrategy strategy =
          parse_strategy(eval.strategy, data.height(), parse_mask_kind(eval.mask), eval.k);
      const StrategyScore score = evaluate_strategy(recoverer, data, strategy, eval.seed);
      io::write_file(eval.report, to_csv(evaluation_table(score)));
      out << "mean_l1 " << format_number(score.mean_l1) << " psnr " << format_number(score.psnr) << " ssim "
          << format_number(score.ssim) << " (zero-fill psnr " << format_number(score.zf_psnr) << ")\n";
      return kOk;
    }

    if (plot_cmd->parsed()) {
      const CsvTable table = read_csv(plot.ranking);
      if (table.rows.empty()) throw ArgumentError(plot.ranking + ": ranking has no rows");
      const std::string svg = scatter_svg(table, {plot.x, plot.y, plot.topk});
      io::write_file(plot.out, svg);
      out << "wrote " << table.rows.size() << " markers to " << plot.out << "\n";
      return kOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kUsage;
}

}  // namespace kbudget::cli
