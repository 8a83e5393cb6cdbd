// Copyright (c) ubpf-forge contributors.
// SPDX-License-Identifier: MIT
//
// Textual assembly front end. One instruction per line, `;` comments,
// `label:` targets, directives `.subprog <name>` and
// `.map <name> <type> <key_size> <value_size> <max_entries> [<lock_off>]`.
#include "ubpf/isa.hpp"

#include "ubpf/helper_ids.hpp"

#include <cctype>
#include <charconv>
#include <map>
#include <sstream>
#include <unordered_map>

namespace ubpf {

namespace {

struct Token {
    std::string text;
    int column;
};

// Splits a line into tokens at whitespace, commas and brackets; brackets are
// kept as their own tokens.
std::vector<Token> tokenize(const std::string& line) {
    std::vector<Token> out;
    size_t i = 0;
    while (i < line.size()) {
        char c = line[i];
        if (c == ';')
            break;
        if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
            ++i;
            continue;
        }
        if (c == '[' || c == ']') {
            out.push_back({std::string(1, c), static_cast<int>(i + 1)});
            ++i;
            continue;
        }
        size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != ',' &&
               line[i] != '[' && line[i] != ']' && line[i] != ';')
            ++i;
        out.push_back({line.substr(start, i - start), static_cast<int>(start + 1)});
    }
    return out;
}

struct OpInfo {
    InsnClass cls;
    uint8_t op;
};

const std::unordered_map<std::string, OpInfo>& alu_mnemonics() {
    static const std::unordered_map<std::string, OpInfo> table = [] {
        std::unordered_map<std::string, OpInfo> t;
        const std::pair<const char*, AluOp> ops[] = {
            {"add", AluOp::ADD}, {"sub", AluOp::SUB},   {"mul", AluOp::MUL}, {"div", AluOp::DIV},
            {"or", AluOp::OR},   {"and", AluOp::AND},   {"lsh", AluOp::LSH}, {"rsh", AluOp::RSH},
            {"neg", AluOp::NEG}, {"mod", AluOp::MOD},   {"xor", AluOp::XOR}, {"mov", AluOp::MOV},
            {"arsh", AluOp::ARSH},
        };
        for (auto [name, op] : ops) {
            t[std::string(name) + "64"] = {InsnClass::ALU64, static_cast<uint8_t>(op)};
            t[std::string(name) + "32"] = {InsnClass::ALU32, static_cast<uint8_t>(op)};
        }
        return t;
    }();
    return table;
}

const std::unordered_map<std::string, OpInfo>& jmp_mnemonics() {
    static const std::unordered_map<std::string, OpInfo> table = [] {
        std::unordered_map<std::string, OpInfo> t;
        const std::pair<const char*, JmpOp> ops[] = {
            {"jeq", JmpOp::JEQ},   {"jgt", JmpOp::JGT},   {"jge", JmpOp::JGE},   {"jset", JmpOp::JSET},
            {"jne", JmpOp::JNE},   {"jsgt", JmpOp::JSGT}, {"jsge", JmpOp::JSGE}, {"jlt", JmpOp::JLT},
            {"jle", JmpOp::JLE},   {"jslt", JmpOp::JSLT}, {"jsle", JmpOp::JSLE},
        };
        for (auto [name, op] : ops) {
            t[name] = {InsnClass::JMP, static_cast<uint8_t>(op)};
            t[std::string(name) + "32"] = {InsnClass::JMP32, static_cast<uint8_t>(op)};
        }
        return t;
    }();
    return table;
}

const std::unordered_map<std::string, OpInfo>& mem_mnemonics() {
    static const std::unordered_map<std::string, OpInfo> table = [] {
        std::unordered_map<std::string, OpInfo> t;
        const std::pair<const char*, MemSize> sizes[] = {
            {"b", MemSize::B}, {"h", MemSize::H}, {"w", MemSize::W}, {"dw", MemSize::DW}};
        for (auto [suffix, size] : sizes) {
            t["ldx" + std::string(suffix)] = {InsnClass::LDX, static_cast<uint8_t>(size)};
            t["stx" + std::string(suffix)] = {InsnClass::STX, static_cast<uint8_t>(size)};
            t["st" + std::string(suffix)] = {InsnClass::ST, static_cast<uint8_t>(size)};
        }
        return t;
    }();
    return table;
}

struct PendingJump {
    uint32_t slot;
    std::string label;
    int line;
    int column;
};

struct PendingCall {
    uint32_t slot;
    std::string name;
    int line;
    int column;
};

class Parser {
  public:
    explicit Parser(const std::string& text) : text_{text} {}

    Program run() {
        std::istringstream in{text_};
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            parse_line(line, lineno);
        }
        finish();
        return std::move(prog_);
    }

  private:
    [[noreturn]] void fail(AsmError::Kind kind, int line, int col, const std::string& msg) {
        throw AsmError{kind, line, col, "line " + std::to_string(line) + ":" + std::to_string(col) + ": " + msg};
    }

    int64_t parse_int(const Token& tok, int line) {
        const std::string& s = tok.text;
        size_t pos = 0;
        bool neg = false;
        if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) {
            neg = s[pos] == '-';
            ++pos;
        }
        int base = 10;
        if (s.size() >= pos + 2 && s[pos] == '0' && (s[pos + 1] == 'x' || s[pos + 1] == 'X')) {
            base = 16;
            pos += 2;
        }
        uint64_t value = 0;
        auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), value, base);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            fail(AsmError::Kind::Syntax, line, tok.column, "expected a number, got '" + s + "'");
        return neg ? -static_cast<int64_t>(value) : static_cast<int64_t>(value);
    }

    uint8_t parse_reg(const Token& tok, int line) {
        const std::string& s = tok.text;
        if (s.size() < 2 || (s[0] != 'r' && s[0] != 'R'))
            fail(AsmError::Kind::Syntax, line, tok.column, "expected a register, got '" + s + "'");
        int64_t n = 0;
        auto [ptr, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), n);
        if (ec != std::errc{} || ptr != s.data() + s.size() || n < 0 || n > kMaxReg)
            fail(AsmError::Kind::Syntax, line, tok.column, "bad register '" + s + "'");
        return static_cast<uint8_t>(n);
    }

    // [rN+off] or [rN-off] or [rN]; expects tokens starting at idx with '['.
    std::pair<uint8_t, int16_t> parse_mem_operand(const std::vector<Token>& toks, size_t& idx, int line) {
        if (idx >= toks.size() || toks[idx].text != "[")
            fail(AsmError::Kind::Syntax, line, idx < toks.size() ? toks[idx].column : 1, "expected '['");
        ++idx;
        if (idx >= toks.size())
            fail(AsmError::Kind::Syntax, line, 1, "unterminated memory operand");
        // The register and offset may arrive fused ("r2+8") or split.
        std::string body;
        int col = toks[idx].column;
        while (idx < toks.size() && toks[idx].text != "]") {
            body += toks[idx].text;
            ++idx;
        }
        if (idx >= toks.size())
            fail(AsmError::Kind::Syntax, line, col, "missing ']'");
        ++idx;
        size_t split = body.find_first_of("+-", 1);
        Token reg_tok{split == std::string::npos ? body : body.substr(0, split), col};
        uint8_t reg = parse_reg(reg_tok, line);
        int16_t off = 0;
        if (split != std::string::npos) {
            Token off_tok{body.substr(split), col};
            int64_t v = parse_int(off_tok, line);
            if (v < INT16_MIN || v > INT16_MAX)
                fail(AsmError::Kind::Syntax, line, col, "memory offset out of range");
            off = static_cast<int16_t>(v);
        }
        return {reg, off};
    }

    void define_label(const std::string& name, int line, int col) {
        uint32_t slot = static_cast<uint32_t>(prog_.insns.size());
        if (!labels_.emplace(name, slot).second)
            fail(AsmError::Kind::DuplicateLabel, line, col, "duplicate label '" + name + "'");
    }

    void directive(const std::vector<Token>& toks, int line) {
        const std::string& d = toks[0].text;
        if (d == ".subprog") {
            if (toks.size() != 2)
                fail(AsmError::Kind::Syntax, line, toks[0].column, ".subprog takes one name");
            close_subprog();
            prog_.subprogs.push_back({toks[1].text, static_cast<uint32_t>(prog_.insns.size()), 0});
        } else if (d == ".map") {
            if (toks.size() != 6 && toks.size() != 7)
                fail(AsmError::Kind::Syntax, line, toks[0].column,
                     ".map takes <name> <type> <key_size> <value_size> <max_entries> [<lock_off>]");
            MapDef def;
            if (toks[2].text == "array")
                def.type = MapType::Array;
            else if (toks[2].text == "hash")
                def.type = MapType::Hash;
            else
                fail(AsmError::Kind::Syntax, line, toks[2].column, "map type must be 'array' or 'hash'");
            def.key_size = static_cast<uint32_t>(parse_int(toks[3], line));
            def.value_size = static_cast<uint32_t>(parse_int(toks[4], line));
            def.max_entries = static_cast<uint32_t>(parse_int(toks[5], line));
            if (toks.size() == 7)
                def.lock_off = static_cast<int32_t>(parse_int(toks[6], line));
            for (const MapRef& r : prog_.map_refs)
                if (r.name == toks[1].text)
                    fail(AsmError::Kind::Syntax, line, toks[1].column, "map '" + toks[1].text + "' already declared");
            prog_.map_refs.push_back({toks[1].text, def});
        } else {
            fail(AsmError::Kind::Syntax, line, toks[0].column, "unknown directive '" + d + "'");
        }
    }

    // Jump target operand: a label, or a relative slot count like +2 / -1.
    void set_jump_target(Instruction& i, const Token& tok, int line) {
        if (tok.text[0] == '+' || tok.text[0] == '-' || std::isdigit(static_cast<unsigned char>(tok.text[0]))) {
            int64_t v = parse_int(tok, line);
            if (v < INT16_MIN || v > INT16_MAX)
                fail(AsmError::Kind::Syntax, line, tok.column, "jump offset out of range");
            i.offset = static_cast<int16_t>(v);
        } else {
            pending_jumps_.push_back({static_cast<uint32_t>(prog_.insns.size()), tok.text, line, tok.column});
        }
    }

    void parse_line(const std::string& line, int lineno) {
        std::vector<Token> toks = tokenize(line);
        if (toks.empty())
            return;
        // Leading labels; several may stack on one line.
        size_t idx = 0;
        while (idx < toks.size() && toks[idx].text.back() == ':') {
            define_label(toks[idx].text.substr(0, toks[idx].text.size() - 1), lineno, toks[idx].column);
            ++idx;
        }
        if (idx == toks.size())
            return;
        toks.erase(toks.begin(), toks.begin() + idx);
        if (toks[0].text[0] == '.') {
            directive(toks, lineno);
            return;
        }
        parse_insn(toks, lineno);
    }

    void parse_insn(const std::vector<Token>& toks, int line) {
        const std::string& m = toks[0].text;
        Instruction i;

        auto require = [&](bool cond, const char* msg) {
            if (!cond)
                fail(AsmError::Kind::Syntax, line, toks[0].column, msg);
        };

        if (auto it = alu_mnemonics().find(m); it != alu_mnemonics().end()) {
            i.cls = it->second.cls;
            i.op = it->second.op;
            if (i.alu_op() == AluOp::NEG) {
                require(toks.size() == 2, "neg takes one register");
                i.dst = parse_reg(toks[1], line);
            } else {
                require(toks.size() == 3, "ALU op takes a register and an operand");
                i.dst = parse_reg(toks[1], line);
                if (toks[2].text[0] == 'r' || toks[2].text[0] == 'R') {
                    i.src = parse_reg(toks[2], line);
                    i.src_kind = SrcKind::Reg;
                } else {
                    int64_t v = parse_int(toks[2], line);
                    if (v < INT32_MIN || v > static_cast<int64_t>(UINT32_MAX))
                        fail(AsmError::Kind::Syntax, line, toks[2].column, "immediate out of 32-bit range");
                    i.imm = static_cast<int32_t>(v);
                }
            }
        } else if (m == "le16" || m == "le32" || m == "le64" || m == "be16" || m == "be32" || m == "be64") {
            require(toks.size() == 2, "byte-swap takes one register");
            i.cls = InsnClass::ALU32;
            i.op = static_cast<uint8_t>(AluOp::END);
            i.dst = parse_reg(toks[1], line);
            i.imm = std::stoi(m.substr(2));
            i.src_kind = m[0] == 'b' ? SrcKind::Reg : SrcKind::Imm;
        } else if (m == "ja") {
            require(toks.size() == 2, "ja takes a target");
            i.cls = InsnClass::JMP;
            i.op = static_cast<uint8_t>(JmpOp::JA);
            set_jump_target(i, toks[1], line);
        } else if (auto jt = jmp_mnemonics().find(m); jt != jmp_mnemonics().end()) {
            require(toks.size() == 4, "conditional jump takes two operands and a target");
            i.cls = jt->second.cls;
            i.op = jt->second.op;
            i.dst = parse_reg(toks[1], line);
            if (toks[2].text[0] == 'r' || toks[2].text[0] == 'R') {
                i.src = parse_reg(toks[2], line);
                i.src_kind = SrcKind::Reg;
            } else {
                int64_t v = parse_int(toks[2], line);
                if (v < INT32_MIN || v > static_cast<int64_t>(UINT32_MAX))
                    fail(AsmError::Kind::Syntax, line, toks[2].column, "immediate out of 32-bit range");
                i.imm = static_cast<int32_t>(v);
            }
            set_jump_target(i, toks[3], line);
        } else if (m == "call") {
            require(toks.size() == 2, "call takes a helper or subprog name");
            i.cls = InsnClass::JMP;
            i.op = static_cast<uint8_t>(JmpOp::CALL);
            const std::string& target = toks[1].text;
            if (std::isdigit(static_cast<unsigned char>(target[0]))) {
                i.imm = static_cast<int32_t>(parse_int(toks[1], line));
            } else {
                pending_calls_.push_back({static_cast<uint32_t>(prog_.insns.size()), target, line, toks[1].column});
            }
        } else if (m == "exit") {
            require(toks.size() == 1, "exit takes no operands");
            i.cls = InsnClass::JMP;
            i.op = static_cast<uint8_t>(JmpOp::EXIT);
        } else if (m == "lddw") {
            require(toks.size() == 3, "lddw takes a register and a value or map name");
            i.cls = InsnClass::LD;
            i.op = static_cast<uint8_t>(MemSize::DW);
            i.dst = parse_reg(toks[1], line);
            const std::string& v = toks[2].text;
            if (std::isdigit(static_cast<unsigned char>(v[0])) || v[0] == '-' || v[0] == '+') {
                uint64_t raw;
                if (v[0] == '-') {
                    raw = static_cast<uint64_t>(parse_int(toks[2], line));
                } else {
                    size_t pos = 0;
                    int base = 10;
                    if (v.size() >= 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X')) {
                        base = 16;
                        pos = 2;
                    }
                    auto [ptr, ec] = std::from_chars(v.data() + pos, v.data() + v.size(), raw, base);
                    if (ec != std::errc{} || ptr != v.data() + v.size())
                        fail(AsmError::Kind::Syntax, line, toks[2].column, "bad 64-bit literal");
                }
                i.imm = static_cast<int32_t>(raw & 0xffffffffu);
                i.wide_imm = static_cast<uint32_t>(raw >> 32);
            } else {
                int ref = -1;
                for (size_t k = 0; k < prog_.map_refs.size(); ++k)
                    if (prog_.map_refs[k].name == v)
                        ref = static_cast<int>(k);
                if (ref < 0)
                    fail(AsmError::Kind::Syntax, line, toks[2].column, "unknown map '" + v + "'");
                i.pseudo = Pseudo::MapRef;
                i.imm = ref;
                i.wide_imm = 0;
            }
        } else if (auto mt = mem_mnemonics().find(m); mt != mem_mnemonics().end()) {
            i.cls = mt->second.cls;
            i.op = mt->second.op;
            size_t idx;
            if (i.cls == InsnClass::LDX) {
                require(toks.size() >= 5, "ldx takes a register and a memory operand");
                i.dst = parse_reg(toks[1], line);
                idx = 2;
                auto [reg, off] = parse_mem_operand(toks, idx, line);
                i.src = reg;
                i.offset = off;
            } else {
                idx = 1;
                auto [reg, off] = parse_mem_operand(toks, idx, line);
                i.dst = reg;
                i.offset = off;
                require(idx < toks.size(), "store needs a source operand");
                if (i.cls == InsnClass::STX) {
                    i.src = parse_reg(toks[idx], line);
                } else {
                    int64_t v = parse_int(toks[idx], line);
                    if (v < INT32_MIN || v > static_cast<int64_t>(UINT32_MAX))
                        fail(AsmError::Kind::Syntax, line, toks[idx].column, "immediate out of 32-bit range");
                    i.imm = static_cast<int32_t>(v);
                }
            }
        } else {
            fail(AsmError::Kind::Syntax, line, toks[0].column, "unknown mnemonic '" + m + "'");
        }

        prog_.insns.push_back(i);
        if (i.is_wide()) {
            Instruction cont;
            cont.cls = InsnClass::LD;
            cont.op = static_cast<uint8_t>(MemSize::DW);
            cont.wide_cont = true;
            cont.imm = static_cast<int32_t>(*i.wide_imm);
            prog_.insns.push_back(cont);
        }
    }

    void close_subprog() {
        Subprog& sp = prog_.subprogs.back();
        sp.len = static_cast<uint32_t>(prog_.insns.size()) - sp.start;
    }

    void finish() {
        close_subprog();
        for (const PendingJump& pj : pending_jumps_) {
            auto it = labels_.find(pj.label);
            if (it == labels_.end())
                fail(AsmError::Kind::UndefinedLabel, pj.line, pj.column, "undefined label '" + pj.label + "'");
            int64_t delta = static_cast<int64_t>(it->second) - static_cast<int64_t>(pj.slot) - 1;
            if (delta < INT16_MIN || delta > INT16_MAX)
                fail(AsmError::Kind::Syntax, pj.line, pj.column, "jump distance out of range");
            prog_.insns[pj.slot].offset = static_cast<int16_t>(delta);
        }
        for (const PendingCall& pc : pending_calls_) {
            int target = -1;
            for (size_t k = 0; k < prog_.subprogs.size(); ++k)
                if (prog_.subprogs[k].name == pc.name)
                    target = static_cast<int>(k);
            if (target >= 0) {
                prog_.insns[pc.slot].pseudo = Pseudo::LocalCall;
                prog_.insns[pc.slot].imm =
                    static_cast<int32_t>(prog_.subprogs[target].start) - static_cast<int32_t>(pc.slot) - 1;
                continue;
            }
            int32_t helper = helper_id_by_name(pc.name);
            if (helper < 0)
                fail(AsmError::Kind::UndefinedLabel, pc.line, pc.column,
                     "unknown subprog or helper '" + pc.name + "'");
            prog_.insns[pc.slot].imm = helper;
        }
    }

    const std::string& text_;
    Program prog_;
    std::map<std::string, uint32_t> labels_;
    std::vector<PendingJump> pending_jumps_;
    std::vector<PendingCall> pending_calls_;
};

std::string alu_name(AluOp op) {
    switch (op) {
    case AluOp::ADD: return "add";
    case AluOp::SUB: return "sub";
    case AluOp::MUL: return "mul";
    case AluOp::DIV: return "div";
    case AluOp::OR: return "or";
    case AluOp::AND: return "and";
    case AluOp::LSH: return "lsh";
    case AluOp::RSH: return "rsh";
    case AluOp::NEG: return "neg";
    case AluOp::MOD: return "mod";
    case AluOp::XOR: return "xor";
    case AluOp::MOV: return "mov";
    case AluOp::ARSH: return "arsh";
    case AluOp::END: return "end";
    }
    return "?";
}

std::string jmp_name(JmpOp op) {
    switch (op) {
    case JmpOp::JA: return "ja";
    case JmpOp::JEQ: return "jeq";
    case JmpOp::JGT: return "jgt";
    case JmpOp::JGE: return "jge";
    case JmpOp::JSET: return "jset";
    case JmpOp::JNE: return "jne";
    case JmpOp::JSGT: return "jsgt";
    case JmpOp::JSGE: return "jsge";
    case JmpOp::CALL: return "call";
    case JmpOp::EXIT: return "exit";
    case JmpOp::JLT: return "jlt";
    case JmpOp::JLE: return "jle";
    case JmpOp::JSLT: return "jslt";
    case JmpOp::JSLE: return "jsle";
    }
    return "?";
}

std::string size_suffix(MemSize s) {
    switch (s) {
    case MemSize::B: return "b";
    case MemSize::H: return "h";
    case MemSize::W: return "w";
    case MemSize::DW: return "dw";
    }
    return "?";
}

} // namespace

std::string format_insn(const Program& p, uint32_t slot) {
    const Instruction& i = p.insns[slot];
    std::ostringstream os;
    auto reg = [](uint8_t r) { return "r" + std::to_string(r); };
    auto target = [&](int16_t off) {
        return (off >= 0 ? "+" : "") + std::to_string(off); // callers substitute labels where available
    };
    if (i.wide_cont)
        return "; wide continuation";
    switch (i.cls) {
    case InsnClass::ALU32:
    case InsnClass::ALU64: {
        bool is64 = i.cls == InsnClass::ALU64;
        if (i.alu_op() == AluOp::END) {
            os << (i.src_kind == SrcKind::Reg ? "be" : "le") << i.imm << " " << reg(i.dst);
        } else if (i.alu_op() == AluOp::NEG) {
            os << alu_name(i.alu_op()) << (is64 ? "64" : "32") << " " << reg(i.dst);
        } else {
            os << alu_name(i.alu_op()) << (is64 ? "64" : "32") << " " << reg(i.dst) << ", ";
            if (i.src_kind == SrcKind::Reg)
                os << reg(i.src);
            else
                os << i.imm;
        }
        break;
    }
    case InsnClass::JMP:
    case InsnClass::JMP32: {
        JmpOp j = i.jmp_op();
        std::string suffix = i.cls == InsnClass::JMP32 ? "32" : "";
        if (j == JmpOp::JA) {
            os << "ja " << target(i.offset);
        } else if (j == JmpOp::EXIT) {
            os << "exit";
        } else if (j == JmpOp::CALL) {
            if (i.pseudo == Pseudo::LocalCall) {
                int t = p.subprog_of(static_cast<uint32_t>(static_cast<int32_t>(slot) + 1 + i.imm));
                os << "call " << (t >= 0 ? p.subprogs[t].name : "?");
            } else if (i.pseudo == Pseudo::DirectCall) {
                os << "; direct map call " << i.imm;
            } else if (const char* name = helper_name(i.imm)) {
                os << "call " << name;
            } else {
                os << "call " << i.imm;
            }
        } else {
            os << jmp_name(j) << suffix << " " << reg(i.dst) << ", ";
            if (i.src_kind == SrcKind::Reg)
                os << reg(i.src);
            else
                os << i.imm;
            os << ", " << target(i.offset);
        }
        break;
    }
    case InsnClass::LD:
        if (i.pseudo == Pseudo::MapRef)
            os << "lddw " << reg(i.dst) << ", "
               << (static_cast<size_t>(i.imm) < p.map_refs.size() ? p.map_refs[i.imm].name : "?");
        else if (i.pseudo == Pseudo::MapValueBase)
            os << "; lddw " << reg(i.dst) << ", map_value_base(" << i.imm << ")";
        else
            os << "lddw " << reg(i.dst) << ", 0x" << std::hex << i.imm64();
        break;
    case InsnClass::LDX:
        os << "ldx" << size_suffix(i.mem_size()) << " " << reg(i.dst) << ", [" << reg(i.src)
           << (i.offset >= 0 ? "+" : "") << i.offset << "]";
        break;
    case InsnClass::ST:
        os << "st" << size_suffix(i.mem_size()) << " [" << reg(i.dst) << (i.offset >= 0 ? "+" : "") << i.offset
           << "], " << i.imm;
        break;
    case InsnClass::STX:
        os << "stx" << size_suffix(i.mem_size()) << " [" << reg(i.dst) << (i.offset >= 0 ? "+" : "") << i.offset
           << "], " << reg(i.src);
        break;
    }
    return os.str();
}

std::string format_asm(const Program& p) {
    std::ostringstream os;
    os << "; ubpf-forge assembly\n";
    for (const MapRef& m : p.map_refs) {
        os << ".map " << m.name << " ";
        if (m.def) {
            os << (m.def->type == MapType::Array ? "array" : "hash") << " " << m.def->key_size << " "
               << m.def->value_size << " " << m.def->max_entries;
            if (m.def->lock_off >= 0)
                os << " " << m.def->lock_off;
        } else {
            os << "array 0 0 0";
        }
        os << "\n";
    }

    // Collect jump-target labels.
    std::map<uint32_t, std::string> labels;
    for (uint32_t s = 0; s < p.insns.size(); ++s) {
        const Instruction& i = p.insns[s];
        if (i.wide_cont)
            continue;
        if (i.is_uncond_jump() || i.is_cond_jump()) {
            uint32_t t = static_cast<uint32_t>(static_cast<int32_t>(s) + 1 + i.offset);
            if (t < p.insns.size() && !labels.count(t))
                labels.emplace(t, "L" + std::to_string(labels.size()));
        }
    }

    for (uint32_t s = 0; s < p.insns.size(); ++s) {
        for (size_t k = 1; k < p.subprogs.size(); ++k)
            if (p.subprogs[k].start == s)
                os << ".subprog " << p.subprogs[k].name << "\n";
        if (auto it = labels.find(s); it != labels.end())
            os << it->second << ":\n";
        const Instruction& i = p.insns[s];
        if (i.wide_cont)
            continue;
        std::string text = format_insn(p, s);
        if (i.is_uncond_jump() || i.is_cond_jump()) {
            uint32_t t = static_cast<uint32_t>(static_cast<int32_t>(s) + 1 + i.offset);
            auto it = labels.find(t);
            if (it != labels.end()) {
                size_t pos = text.rfind((i.offset >= 0 ? "+" : "") + std::to_string(i.offset));
                if (pos != std::string::npos)
                    text = text.substr(0, pos) + it->second;
            }
        }
        os << "  " << text << "\n";
    }
    return os.str();
}

Program parse_asm(const std::string& text) { return Parser{text}.run(); }

} // namespace ubpf
