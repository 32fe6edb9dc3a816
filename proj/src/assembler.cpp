#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

#include "msw/error.hpp"
#include "msw/isa.hpp"

namespace msw {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

bool is_ident_start(char c)
{
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

bool is_ident_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$' ||
           c == '-' || c == '#';
}

bool is_ident(std::string_view s)
{
    if (s.empty() || !is_ident_start(s.front()))
        return false;
    for (char c : s)
        if (!is_ident_char(c))
            return false;
    return true;
}

std::optional<long long> parse_number(std::string_view s)
{
    long long v = 0;
    int base = 10;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        s.remove_prefix(2);
        base = 16;
    }
    if (s.empty())
        return std::nullopt;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

// Strip a trailing ';' comment that is not inside a string literal.
std::string_view strip_comment(std::string_view line)
{
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_str && c == '\\') {
            ++i;
            continue;
        }
        if (c == '"')
            in_str = !in_str;
        else if (c == ';' && !in_str)
            return line.substr(0, i);
    }
    return line;
}

std::vector<std::string_view> split_operands(std::string_view s)
{
    std::vector<std::string_view> out;
    bool in_str = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_str && c == '\\') {
            ++i;
            continue;
        }
        if (c == '"')
            in_str = !in_str;
        else if (c == ',' && !in_str) {
            out.push_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    }
    auto last = trim(s.substr(start));
    if (!last.empty() || !out.empty())
        out.push_back(last);
    return out;
}

std::string unquote(std::string_view s, std::size_t line)
{
    if (s.size() < 2 || s.front() != '"' || s.back() != '"')
        throw AssemblyError(line, "expected a quoted string, got '" + std::string(s) + "'");
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        char c = s[i];
        if (c == '\\' && i + 2 < s.size()) {
            c = s[++i];
            if (c == 'n')
                c = '\n';
            else if (c == 't')
                c = '\t';
        }
        out.push_back(c);
    }
    return out;
}

std::string quote(std::string_view s)
{
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

struct Fixup {
    std::size_t instr;
    std::size_t operand;
    std::string label;
    std::size_t line;
};

class Assembler {
public:
    Program run(std::string_view text)
    {
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const std::size_t nl = text.find('\n', pos);
            const auto raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
            ++line_no;
            line(raw, line_no);
            if (nl == std::string_view::npos)
                break;
            pos = nl + 1;
        }
        resolve();
        return std::move(prog_);
    }

private:
    void line(std::string_view raw, std::size_t ln)
    {
        auto s = trim(strip_comment(raw));
        if (s.empty())
            return;

        // label prefix
        if (auto colon = s.find(':'); colon != s.npos && s.find('"') > colon) {
            auto name = trim(s.substr(0, colon));
            if (is_ident(name) && name.front() != '.') {
                define_label(std::string(name), ln);
                s = trim(s.substr(colon + 1));
                if (s.empty())
                    return;
            }
        }

        std::size_t sp = 0;
        while (sp < s.size() && !std::isspace(static_cast<unsigned char>(s[sp])))
            ++sp;
        const auto head = s.substr(0, sp);
        const auto ops = split_operands(trim(s.substr(sp)));

        if (head.front() == '.') {
            directive(head, ops, ln);
            return;
        }

        auto op = opcode_from_mnemonic(head);
        if (!op)
            throw AssemblyError(ln, "unknown mnemonic '" + std::string(head) + "'");
        instruction(*op, ops, ln);
    }

    void define_label(const std::string& name, std::size_t ln)
    {
        if (prog_.labels.contains(name))
            throw AssemblyError(ln, "duplicate label '" + name + "'");
        prog_.labels[name] = static_cast<std::uint16_t>(prog_.code.size() + 1);
    }

    long long number(std::string_view s, std::size_t ln)
    {
        auto v = parse_number(s);
        if (!v)
            throw AssemblyError(ln, "malformed operand '" + std::string(s) + "'");
        return *v;
    }

    void directive(std::string_view head, const std::vector<std::string_view>& ops, std::size_t ln)
    {
        auto need = [&](std::size_t n) {
            if (ops.size() != n)
                throw AssemblyError(ln, std::string(head) + " takes " + std::to_string(n) +
                                            " operand(s)");
        };
        if (head == ".entry") {
            need(1);
            if (auto v = parse_number(ops[0]))
                prog_.entry = static_cast<Address>(*v);
            else if (is_ident(ops[0]))
                entry_label_ = Fixup{0, 0, std::string(ops[0]), ln};
            else
                throw AssemblyError(ln, "malformed entry '" + std::string(ops[0]) + "'");
        } else if (head == ".memory") {
            need(1);
            const auto v = number(ops[0], ln);
            if (v < 0 || v > 0xFFFF)
                throw AssemblyError(ln, "memory size out of range");
            prog_.memory_size = static_cast<std::uint16_t>(v);
        } else if (head == ".switches") {
            for (auto o : ops) {
                const auto v = number(o, ln);
                // 0 marks a switch id the program never touches.
                if (v == 1 || v < 0 || v > 0xFFFF)
                    throw AssemblyError(ln, "switch size must be 0 or at least 2");
                prog_.switch_sizes.push_back(static_cast<int>(v));
            }
        } else if (head == ".string") {
            need(1);
            prog_.strings.push_back(unquote(ops[0], ln));
        } else if (head == ".extern") {
            need(1);
            if (!is_ident(ops[0]))
                throw AssemblyError(ln, "malformed extern name '" + std::string(ops[0]) + "'");
            prog_.externs.emplace_back(ops[0]);
        } else if (head == ".var") {
            need(2);
            if (!is_ident(ops[0]))
                throw AssemblyError(ln, "malformed variable name '" + std::string(ops[0]) + "'");
            const auto v = number(ops[1], ln);
            if (v < 1 || v > 0xFFFF)
                throw AssemblyError(ln, "variable cell out of range");
            prog_.variables[std::string(ops[0])] = static_cast<std::uint16_t>(v);
        } else {
            throw AssemblyError(ln, "unknown directive '" + std::string(head) + "'");
        }
    }

    void instruction(Opcode op, const std::vector<std::string_view>& ops, std::size_t ln)
    {
        const auto& info = op_info(op);
        if (ops.size() != info.operands.size())
            throw AssemblyError(ln, std::string(info.mnemonic) + " takes " +
                                        std::to_string(info.operands.size()) +
                                        " operand(s), got " + std::to_string(ops.size()));
        Instruction instr;
        instr.op = op;
        for (std::size_t i = 0; i < ops.size(); ++i) {
            const auto o = ops[i];
            long long v = 0;
            switch (info.operands[i]) {
            case OperandKind::Reg:
                if (o.size() > 1 && (o[0] == 'r' || o[0] == 'R'))
                    v = number(o.substr(1), ln);
                else
                    v = number(o, ln);
                if (v < 0 || v >= kRegisterCount)
                    throw AssemblyError(ln, "no such register '" + std::string(o) + "'");
                break;
            case OperandKind::Addr:
                if (auto n = parse_number(o)) {
                    v = *n;
                } else if (is_ident(o)) {
                    fixups_.push_back({prog_.code.size(), i, std::string(o), ln});
                } else {
                    throw AssemblyError(ln, "malformed address '" + std::string(o) + "'");
                }
                break;
            case OperandKind::Kind:
                if (o == "and" || o == "AND")
                    v = 0;
                else if (o == "or" || o == "OR")
                    v = 1;
                else
                    v = number(o, ln);
                if (v > 1 || v < 0)
                    throw AssemblyError(ln, "gate kind must be and/or");
                break;
            case OperandKind::Str:
                if (!o.empty() && o.front() == '"')
                    v = prog_.intern_string(unquote(o, ln));
                else
                    v = number(o, ln);
                break;
            case OperandKind::Ext:
                if (auto n = parse_number(o))
                    v = *n;
                else if (is_ident(o))
                    v = prog_.intern_extern(o);
                else
                    throw AssemblyError(ln, "malformed extern '" + std::string(o) + "'");
                break;
            default:
                v = number(o, ln);
            }
            if (v < 0 || v > 0xFFFF)
                throw AssemblyError(ln, "operand '" + std::string(o) + "' does not fit 16 bits");
            instr.args[i] = static_cast<std::uint16_t>(v);
        }
        prog_.code.push_back(instr);
    }

    std::uint16_t lookup(const Fixup& f)
    {
        auto it = prog_.labels.find(f.label);
        if (it == prog_.labels.end())
            throw AssemblyError(f.line, "undefined label '" + f.label + "'");
        return it->second;
    }

    void resolve()
    {
        for (const auto& f : fixups_)
            prog_.code[f.instr].args[f.operand] = lookup(f);
        if (entry_label_)
            prog_.entry = lookup(*entry_label_);
        for (const auto& instr : prog_.code) {
            const auto& info = op_info(instr.op);
            for (std::size_t i = 0; i < info.operands.size(); ++i) {
                if (info.operands[i] == OperandKind::Str && instr.args[i] >= prog_.strings.size())
                    throw AssemblyError(0, "string index " + std::to_string(instr.args[i]) +
                                               " out of range");
                if (info.operands[i] == OperandKind::Ext && instr.args[i] >= prog_.externs.size())
                    throw AssemblyError(0, "extern index " + std::to_string(instr.args[i]) +
                                               " out of range");
            }
        }
    }

    Program prog_;
    std::vector<Fixup> fixups_;
    std::optional<Fixup> entry_label_;
};

}  // namespace

Program assemble(std::string_view text)
{
    return Assembler{}.run(text);
}

namespace {

std::set<Address> referenced_addresses(const Program& p)
{
    std::set<Address> referenced;
    if (!p.code.empty())
        referenced.insert(p.entry);
    for (const auto& instr : p.code) {
        const auto& info = op_info(instr.op);
        for (std::size_t i = 0; i < info.operands.size(); ++i)
            if (info.operands[i] == OperandKind::Addr && instr.args[i] != 0)
                referenced.insert(instr.args[i]);
    }
    return referenced;
}

std::string fresh_label(const Program& p, Address a)
{
    std::string n = "L" + std::to_string(a);
    while (p.labels.contains(n))
        n = "_" + n;
    return n;
}

}  // namespace

void label_targets(Program& p)
{
    std::set<Address> named;
    for (const auto& [name, addr] : p.labels)
        named.insert(addr);
    for (Address a : referenced_addresses(p))
        if (!named.contains(a))
            p.labels[fresh_label(p, a)] = a;
}

std::string disassemble(const Program& p)
{
    const std::set<Address> referenced = referenced_addresses(p);

    std::map<Address, std::string> names;
    for (const auto& [name, addr] : p.labels)
        if (!names.contains(addr))
            names[addr] = name;
    for (Address a : referenced) {
        if (names.contains(a))
            continue;
        names[a] = fresh_label(p, a);
    }
    auto addr_name = [&](Address a) -> std::string {
        if (a == 0)
            return "0";
        auto it = names.find(a);
        return it != names.end() ? it->second : std::to_string(a);
    };

    std::ostringstream os;
    if (!p.code.empty() || p.entry != 1)
        os << ".entry " << addr_name(p.entry) << "\n";
    os << ".memory " << p.memory_size << "\n";
    if (!p.switch_sizes.empty()) {
        os << ".switches ";
        for (std::size_t i = 0; i < p.switch_sizes.size(); ++i)
            os << (i ? ", " : "") << p.switch_sizes[i];
        os << "\n";
    }
    for (const auto& s : p.strings)
        os << ".string " << quote(s) << "\n";
    for (const auto& s : p.externs)
        os << ".extern " << s << "\n";
    for (const auto& [name, cell] : p.variables)
        os << ".var " << name << ", " << cell << "\n";

    for (Address a = 1; a <= p.code.size(); ++a) {
        if (auto it = names.find(a); it != names.end())
            os << it->second << ":\n";
        const auto& instr = p.at(a);
        const auto& info = op_info(instr.op);
        os << "    " << info.mnemonic;
        for (std::size_t i = 0; i < info.operands.size(); ++i) {
            os << (i == 0 ? " " : ", ");
            const auto v = instr.args[i];
            switch (info.operands[i]) {
            case OperandKind::Reg: os << "r" << v; break;
            case OperandKind::Addr: os << addr_name(v); break;
            case OperandKind::Kind: os << (v == 0 ? "and" : "or"); break;
            default: os << v;
            }
        }
        os << "\n";
    }
    // Labels that point one past the last instruction.
    for (const auto& [addr, name] : names)
        if (addr > p.code.size())
            os << name << ":\n";
    return os.str();
}

}  // namespace msw
