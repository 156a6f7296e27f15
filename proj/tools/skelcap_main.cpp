#include <iostream>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "skelcap/cli.hpp"

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Keep large tape buffers on the heap instead of mmap/munmap per op.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  std::vector<std::string> args(argv, argv + argc);
  return skelcap::run_cli(args, std::cout, std::cerr);
}
