// Copyright 2026 The ullava Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command implementations behind the `ullava` binary:
//   build-data  synthetic corpora, adapters and the salient pipeline
//   train       stage I and/or stage II, writing checkpoint and reports
//   eval        cIoU / Prec@0.5 over dataset splits
//   infer       greedy answer plus mask files and fused box
// Exit codes: 0 success, 1 validation, 2 runtime.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ullava/config.hpp"
#include "ullava/error.hpp"
#include "ullava/metrics.hpp"
#include "ullava/salient.hpp"
#include "ullava/trainer.hpp"

namespace ullava::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

int exit_code_for(ErrorCode code);

struct DatasetFile {
    std::string task;
    std::filesystem::path path;
    std::size_t count = 0;
};

struct BuildDataResult {
    std::vector<DatasetFile> files;
    std::filesystem::path report;
    std::optional<data::SalientBuildReport> salient;
};

BuildDataResult cmd_build_data(const Config& config, const std::filesystem::path& out, bool mock_clients);

struct TrainResult {
    std::filesystem::path checkpoint;
    std::vector<std::filesystem::path> report_files;
    std::vector<train::TrainReport> reports;
};

TrainResult cmd_train(const Config& config, const std::filesystem::path& out,
                      const std::optional<std::filesystem::path>& init_checkpoint);

/// Loads a dataset and makes every visual path absolute.
std::vector<ConversationSample> load_split(const std::filesystem::path& path);

metrics::EvalReport cmd_eval(const Config& config, const std::filesystem::path& checkpoint,
                             const std::vector<std::filesystem::path>& splits, const std::filesystem::path& out);

struct InferResult {
    std::string text;
    std::vector<std::filesystem::path> mask_files;
    std::optional<NormalizedBox> box;
};

InferResult cmd_infer(const Config& config, const std::filesystem::path& checkpoint,
                      const std::optional<std::filesystem::path>& visual, bool video, const std::string& prompt,
                      const std::filesystem::path& out);

/// Parses arguments and dispatches; results go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ullava::cli
