#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "daa/corpus.hpp"
#include "daa/policy.hpp"

namespace daa::test {

inline std::filesystem::path tmp_path(const std::string& name) {
    const std::filesystem::path dir = std::filesystem::path(DAA_TEST_TMP);
    std::filesystem::create_directories(dir);
    return dir / name;
}

inline std::filesystem::path write_file(const std::string& name, const std::string& text) {
    const auto p = tmp_path(name);
    std::ofstream(p, std::ios::binary | std::ios::trunc) << text;
    return p;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline PolicyShape small_shape(int V = 16) {
    PolicyShape s;
    s.vocab_size = V;
    s.embed_dim = 4;
    s.hidden_dim = 6;
    s.context_order = 3;
    return s;
}

}  // namespace daa::test
