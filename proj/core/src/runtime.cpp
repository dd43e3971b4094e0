#include "ofsr/runtime.hpp"

#include <cblas.h>

#include <cstdlib>
#include <unistd.h>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ofsr {

void init_runtime(char** argv) {
  // Debian's dynamic-arch OpenBLAS misdetects some virtualized CPUs and
  // falls back to a slow generic kernel. Pick the kernel set from CPUID
  // when the user has not chosen one. OpenBLAS reads the variable in an
  // ELF constructor, so a fresh exec is required for it to take effect.
#if defined(__x86_64__)
  if (!std::getenv("OPENBLAS_CORETYPE") && !std::getenv("OFSR_NO_REEXEC") && argv) {
    const char* coretype = nullptr;
    if (__builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512bw") &&
        __builtin_cpu_supports("avx512vl") && __builtin_cpu_supports("avx512dq")) {
      coretype = "SKYLAKEX";
    } else if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
      coretype = "HASWELL";
    }
    if (coretype) {
      setenv("OPENBLAS_CORETYPE", coretype, 1);
      execv("/proc/self/exe", argv);
      // exec failed; continue with whatever kernels we have.
      unsetenv("OPENBLAS_CORETYPE");
    }
  }
#endif
  // Single-threaded BLAS: results are then independent of machine load and
  // bitwise reproducible run to run.
  openblas_set_num_threads(1);

#if defined(__GLIBC__)
  // Training allocates and frees multi-megabyte activation buffers every
  // step. glibc serves those with mmap/munmap by default, which costs more
  // kernel time than the arithmetic saves; keep them on the heap instead.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace ofsr
