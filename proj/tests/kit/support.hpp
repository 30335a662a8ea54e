#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace testing_support {

inline std::filesystem::path fixture(const std::string& name)
{
    return std::filesystem::path(DRVSYNTH_FIXTURE_DIR) / name;
}

inline std::filesystem::path tool(const std::string& name)
{
    return std::filesystem::path(DRVSYNTH_TOOLS_DIR) / name;
}

inline std::filesystem::path prompts_dir()
{
    return std::filesystem::path(DRVSYNTH_PROMPTS_DIR);
}

inline std::filesystem::path driver(const std::string& name)
{
    return std::filesystem::path(DRVSYNTH_DRIVERS_DIR) / name;
}

inline std::string capture(const std::string& command)
{
    std::string out;
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(::popen(command.c_str(), "r"), ::pclose);
    if (!pipe) {
        return out;
    }
    std::array<char, 4096> buf{};
    size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe.get())) > 0) {
        out.append(buf.data(), n);
    }
    return out;
}

inline std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        out.push_back(line);
    }
    return out;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir()
    {
        std::string pattern = (std::filesystem::temp_directory_path() / "drvsynth-test-XXXXXX").string();
        path_ = ::mkdtemp(pattern.data());
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace testing_support
