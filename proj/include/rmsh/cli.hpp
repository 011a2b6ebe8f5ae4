#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rmsh {

// FNV-1a 64-bit digest; this is the hash recorded for every file a run
// manifest references.
std::uint64_t fnv1a64(std::string_view bytes);

// Digest of a file's bytes rendered as 16 lowercase hex digits.
std::string file_digest(const std::string& path);

// The whole command-line surface behind the `rmsh` binary. `args` excludes
// the program name. Normal output goes to `out`; failures print one
// "error <code>: <message>" line to `err` and return a nonzero exit code.
//
// Subcommands: bounds, gen, train, encode, search, eval, sweep.
// Global flags: --seed, --config, --out-dir, --quiet. Every run writes a
// <subcommand>.manifest.json next to its outputs recording the resolved
// configuration, input/output digests, and seed.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rmsh
