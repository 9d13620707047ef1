#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace pfcpgan {

/// Keeps freed activation buffers inside the process heap instead of returning
/// them to the OS after every layer. Training allocates and frees many
/// megabyte-sized tensors per step; without this, page faults cost ~20% of a step.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

}  // namespace pfcpgan
