#pragma once

namespace ofsr {

/// Pin the BLAS backend for speed and determinism: selects an OpenBLAS
/// kernel set matching the CPU when OPENBLAS_CORETYPE is unset (re-executing
/// the process once, since OpenBLAS reads the variable at load time) and
/// fixes the thread count to 1. Call first thing in main(), passing argv.
void init_runtime(char** argv);

}  // namespace ofsr
