#pragma once

#include <iosfwd>

namespace dataengine {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIntegrity = 3;
inline constexpr int kExitNotFound = 4;
inline constexpr int kExitWouldOverwrite = 5;

// Entry point of the dataengine tool. Summaries go to out as key=value
// lines, diagnostics to err.
//
//   run <config.json>             collect a campaign into <out>/store.log
//   label <store.log>             re-label stored episodes
//   curve <store.log>             learning-curve CSV
//   inspect <store.log> <id>      lineage of one record
//   gen-model                     write a cylinder model file
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dataengine
