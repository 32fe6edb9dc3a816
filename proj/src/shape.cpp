#include "msw/shape.hpp"

#include <charconv>
#include <sstream>

#include "msw/error.hpp"

namespace msw {

namespace {

int to_int(std::string_view s, std::string_view what)
{
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ArgumentError("shape: malformed " + std::string(what) + " '" + std::string(s) + "'");
    return v;
}

}  // namespace

void MachineShape::validate() const
{
    if (procs < 1)
        throw ShapeError("shape needs at least one processor");
    for (int s : sizes)
        if (s < 2)
            throw ShapeError("switch size " + std::to_string(s) + " is below 2");
}

MachineShape MachineShape::default_shape()
{
    return uniform(8, 10, 8);
}

MachineShape MachineShape::uniform(int count, int size, int procs)
{
    MachineShape s{std::vector<int>(static_cast<std::size_t>(count), size), procs};
    s.validate();
    return s;
}

MachineShape MachineShape::parse(std::string_view text)
{
    int count = -1;
    std::vector<int> sizes;
    int procs = 1;

    std::istringstream in{std::string(text)};
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw ArgumentError("shape: expected key=value, got '" + tok + "'");
        const std::string_view key(tok.data(), eq);
        const std::string_view val(tok.data() + eq + 1, tok.size() - eq - 1);
        if (key == "switches") {
            count = to_int(val, "switch count");
        } else if (key == "sizes") {
            sizes.clear();
            std::size_t pos = 0;
            while (pos <= val.size()) {
                auto comma = val.find(',', pos);
                if (comma == std::string_view::npos)
                    comma = val.size();
                sizes.push_back(to_int(val.substr(pos, comma - pos), "size"));
                pos = comma + 1;
            }
        } else if (key == "procs") {
            procs = to_int(val, "processor count");
        } else {
            throw ArgumentError("shape: unknown key '" + std::string(key) + "'");
        }
    }

    if (count < 0)
        count = sizes.empty() ? 0 : static_cast<int>(sizes.size());
    if (sizes.empty())
        sizes.assign(static_cast<std::size_t>(count), 10);
    else if (sizes.size() == 1 && count > 1)
        sizes.assign(static_cast<std::size_t>(count), sizes.front());
    if (static_cast<int>(sizes.size()) != count)
        throw ArgumentError("shape: switches=" + std::to_string(count) + " but " +
                            std::to_string(sizes.size()) + " sizes given");

    MachineShape s{std::move(sizes), procs};
    s.validate();
    return s;
}

std::string MachineShape::to_string() const
{
    std::ostringstream os;
    os << "switches=" << sizes.size() << " sizes=";
    for (std::size_t i = 0; i < sizes.size(); ++i)
        os << (i ? "," : "") << sizes[i];
    os << " procs=" << procs;
    return os.str();
}

}  // namespace msw
