// Command-line surface. Subcommands: train (static SGD), dropin,
// plasticity, prune (one-shot prune + retrain), eval (checkpoint accuracy
// on a CSV), bench (multi-arm experiment). Exit codes: 0 success, 1 config
// error, 2 numeric failure.
#pragma once

namespace plasticnn {

int cli_dispatch(int argc, const char* const* argv);

}  // namespace plasticnn
