#pragma once

#include "normlab/config.hpp"

// The experiment runners behind the CLI subcommands. Each one validates its
// key set, runs the sweep, and writes CSV artifacts into the directory named
// by the "out" key (default "out"). The returned int is the process exit
// code: 0 on success, 3 when strict=true and the run ended in a collapse or
// non-convergence. Bad configuration throws ConfigError.

namespace normlab {

int cmd_converge(const ConfigMap& values);
int cmd_wd_sweep(const ConfigMap& values);
int cmd_latent_train(const ConfigMap& values);
int cmd_bound_check(const ConfigMap& values);
int cmd_opphalves(const ConfigMap& values);
int cmd_potential(const ConfigMap& values);

}  // namespace normlab
