#pragma once

#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "higarment/config.hpp"
#include "higarment/model.hpp"

namespace hg::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kNumeric = 3 };

// Runs one command line (without the program name). Normal output goes to
// `out`, diagnostics to `err`. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// A training output directory: model.hgck, config.txt, vocab.tsv and
// fabric_db/db.jsonl.
struct LoadedRun {
  RunConfig config;
  std::unique_ptr<HiGarment> model;
  std::vector<std::filesystem::path> files;
};
LoadedRun load_run(const std::filesystem::path& dir);

}  // namespace hg::cli
