#pragma once

#include <optional>
#include <string>

#include "ringmd/engine.hpp"

namespace ringmd {

// How the run obtains its particles: a generated water box or a system file.
struct SystemSource {
    enum class Kind { generated, file };
    Kind kind = Kind::generated;
    std::string path;         // file kind
    WaterGenParams gen;       // generated kind
    Int3 replicate{1, 1, 1};
};

struct ConfigFile {
    SystemSource source;
    RunConfig run;

    System build_system() const;
};

// Strict parse: unknown keys anywhere in the document are rejected.
ConfigFile parse_config(const std::string& json_text);
ConfigFile load_config(const std::string& path);

}  // namespace ringmd
