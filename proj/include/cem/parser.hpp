// Copyright 2026 The cem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Concrete syntax for modules (.cem) and systems (.ces), and the matching
// renderer. Grammar, informally:
//
//   module <Name> {
//     refs { ref <Producer> { type <n>@<k> : <type>; fun <f>@<k> : <type> -> <type>; } }
//     defs { type <n>@<k> = <type>; fun <f>@<k> : <type> -> <type> = <expr>; }
//   }
//   service <Name> @ <label> {
//     proxy <Producer> @ <label> { <local> -> <remote> : <type> -> <type>; }
//     outdated <Producer> @ <label> { type <n>@<k> = <type>; fun <f>@<k> : <type>; }
//     thread <id> = <expr>;
//   }
//
// Types: int | string | { <label>@<k> : <type>, ... } | <Name>@<k> | <type> -> <type>.
// Expressions: literals, names, \x : <type> . <expr>, e(e), e + e,
// { <label>@<k> = e, ... }, e.label, e { <label>@<k> = e, ... }.
// A key written `?` is replaced by a fresh `k<N>` above every key in the unit.

#pragma once

#include "cem/ast.hpp"

#include <cctype>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace cem {

namespace detail {

struct Token {
    enum class Kind : std::uint8_t { Ident, Int, Str, Punct, End };

    Kind kind = Kind::End;
    std::string text;
    std::int64_t num = 0;
    SourceLoc loc;
};

class Lexer {
public:
    explicit Lexer(std::string_view src)
      : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token tok;
            tok.loc = SourceLoc{line_, col_};
            if (pos_ >= src_.size()) {
                out.push_back(tok);
                return out;
            }
            const char c = src_[pos_];
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                tok.kind = Token::Kind::Ident;
                while (pos_ < src_.size()
                       && (std::isalnum(static_cast<unsigned char>(src_[pos_]))
                           || src_[pos_] == '_')) {
                    tok.text += src_[pos_];
                    advance();
                }
            } else if (std::isdigit(static_cast<unsigned char>(c))
                       || (c == '-' && pos_ + 1 < src_.size()
                           && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
                tok.kind = Token::Kind::Int;
                bool negative = c == '-';
                if (negative) {
                    advance();
                }
                std::uint64_t n = 0;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                    n = n * 10 + static_cast<std::uint64_t>(src_[pos_] - '0');
                    if (n > static_cast<std::uint64_t>(INT64_MAX)) {
                        throw Error(ErrorCode::SyntaxError, "integer literal too large", tok.loc);
                    }
                    advance();
                }
                tok.num = negative ? -static_cast<std::int64_t>(n) : static_cast<std::int64_t>(n);
            } else if (c == '"') {
                tok.kind = Token::Kind::Str;
                advance();
                for (;;) {
                    if (pos_ >= src_.size() || src_[pos_] == '\n') {
                        throw Error(ErrorCode::SyntaxError, "unterminated string literal", tok.loc);
                    }
                    char ch = src_[pos_];
                    advance();
                    if (ch == '"') {
                        break;
                    }
                    if (ch == '\\') {
                        if (pos_ >= src_.size()) {
                            throw Error(ErrorCode::SyntaxError, "bad escape", tok.loc);
                        }
                        char esc = src_[pos_];
                        advance();
                        switch (esc) {
                        case 'n': ch = '\n'; break;
                        case 't': ch = '\t'; break;
                        case '"': ch = '"'; break;
                        case '\\': ch = '\\'; break;
                        default:
                            throw Error(ErrorCode::SyntaxError,
                                        std::string("unknown escape \\") + esc, tok.loc);
                        }
                    }
                    tok.text += ch;
                }
            } else if (src_.substr(pos_, 2) == "->") {
                tok.kind = Token::Kind::Punct;
                tok.text = "->";
                advance();
                advance();
            } else if (src_.substr(pos_, 3) == "\xE2\x86\x92") { // →
                tok.kind = Token::Kind::Punct;
                tok.text = "->";
                pos_ += 3;
                ++col_;
            } else if (src_.substr(pos_, 2) == "\xCE\xBB") { // λ
                tok.kind = Token::Kind::Punct;
                tok.text = "\\";
                pos_ += 2;
                ++col_;
            } else if (std::string_view("{}()[];:,=.@\\+?").find(c) != std::string_view::npos) {
                tok.kind = Token::Kind::Punct;
                tok.text = std::string(1, c);
                advance();
            } else {
                throw Error(ErrorCode::SyntaxError,
                            std::string("unexpected character '") + c + "'", tok.loc);
            }
            out.push_back(std::move(tok));
        }
    }

private:
    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_space() {
        while (pos_ < src_.size()) {
            if (std::isspace(static_cast<unsigned char>(src_[pos_]))) {
                advance();
            } else if (src_.substr(pos_, 2) == "//") {
                while (pos_ < src_.size() && src_[pos_] != '\n') {
                    advance();
                }
            } else {
                break;
            }
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class Parser {
public:
    explicit Parser(std::string_view src)
      : toks_(Lexer(src).run()) {
        // fresh keys for `@?` start above every numbered key in the unit
        for (std::size_t i = 1; i < toks_.size(); ++i) {
            if (toks_[i - 1].text == "@" && toks_[i].kind == Token::Kind::Ident
                && toks_[i].text[0] == 'k') {
                if (auto n = numeric_suffix(toks_[i].text)) {
                    next_key_ = std::max(next_key_, *n + 1);
                }
            }
        }
    }

    bool at_end() const { return peek().kind == Token::Kind::End; }
    bool at_keyword(std::string_view kw) const {
        return peek().kind == Token::Kind::Ident && peek().text == kw;
    }
    const Token& peek(std::size_t ahead = 0) const {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }

    Module parse_module() {
        const SourceLoc start = peek().loc;
        expect_keyword("module");
        Module m;
        m.name = expect_ident("module name");
        expect("{");
        bool seen_refs = false;
        bool seen_defs = false;
        while (!accept("}")) {
            if (accept_keyword("refs")) {
                if (seen_refs) {
                    throw error("duplicate refs section");
                }
                seen_refs = true;
                expect("{");
                while (!accept("}")) {
                    m.refs.push_back(parse_reference());
                }
            } else if (accept_keyword("defs")) {
                if (seen_defs) {
                    throw error("duplicate defs section");
                }
                seen_defs = true;
                expect("{");
                while (!accept("}")) {
                    m.defs.push_back(parse_definition());
                }
            } else {
                throw error("expected 'refs' or 'defs'");
            }
        }
        try {
            validate_module(m);
        } catch (Error& e) {
            e.with_loc(start).with_service(m.name);
            throw;
        }
        return m;
    }

    Type parse_type() {
        Type lhs = parse_atype();
        if (accept("->")) {
            return Type::arrow(std::move(lhs), parse_type());
        }
        return lhs;
    }

    Expr parse_expr() {
        if (accept("\\")) {
            std::string param = expect_ident("parameter name");
            expect(":");
            Type t = parse_type();
            expect(".");
            bound_.push_back(param);
            Expr body = parse_expr();
            bound_.pop_back();
            return ex::lambda(std::move(param), std::move(t), std::move(body));
        }
        Expr lhs = parse_postfix();
        while (accept("+")) {
            lhs = ex::add(std::move(lhs), parse_postfix());
        }
        return lhs;
    }

    // --- system files -----------------------------------------------------

    struct ServiceDecl {
        std::string module;
        DeployLabel label;
        std::vector<Proxy> proxies;
        std::vector<Thread> threads;
        SourceLoc loc;
    };

    ServiceDecl parse_service() {
        ServiceDecl s;
        s.loc = peek().loc;
        expect_keyword("service");
        s.module = expect_ident("service name");
        expect("@");
        s.label = DeployLabel{expect_ident("deployment label")};
        expect("{");
        while (!accept("}")) {
            if (accept_keyword("proxy")) {
                std::string producer = expect_ident("producer name");
                expect("@");
                DeployLabel label{expect_ident("deployment label")};
                expect("{");
                std::vector<ValueProxy> entries;
                while (!accept("}")) {
                    ValueProxy vp;
                    vp.local = expect_ident("local function name");
                    expect("->");
                    vp.remote = expect_ident("remote function name");
                    expect(":");
                    vp.type = parse_type();
                    accept(";");
                    entries.push_back(std::move(vp));
                }
                s.proxies.push_back(Proxy::ready(producer, std::move(entries), std::move(label)));
            } else if (accept_keyword("outdated")) {
                std::string producer = expect_ident("producer name");
                expect("@");
                DeployLabel label{expect_ident("deployment label")};
                expect("{");
                Signature sig;
                while (!accept("}")) {
                    const bool is_type = at_keyword("type");
                    if (!accept_keyword("type") && !accept_keyword("fun")) {
                        throw error("expected 'type' or 'fun' in outdated signature");
                    }
                    std::string name = expect_ident("element name");
                    ElementKey k = parse_key();
                    if (is_type) {
                        expect("=");
                    } else {
                        expect(":");
                    }
                    Type t = parse_type();
                    accept(";");
                    sig.entries[k] = SignatureEntry{producer, std::move(name),
                                                    is_type ? ElementKind::Type : ElementKind::Value,
                                                    std::move(t)};
                }
                s.proxies.push_back(Proxy::outdated(producer, std::move(sig), std::move(label)));
            } else if (accept_keyword("thread")) {
                const Token& id = peek();
                std::string name = expect_ident("thread id");
                auto n = numeric_suffix(name);
                if (name[0] != 's' || !n) {
                    throw Error(ErrorCode::SyntaxError, "thread ids look like s<N>", id.loc);
                }
                expect("=");
                Expr e = parse_expr();
                accept(";");
                s.threads.push_back(Thread{ThreadId{*n}, std::move(e)});
            } else {
                throw error("expected 'proxy', 'outdated' or 'thread'");
            }
        }
        return s;
    }

    Error error(const std::string& what) const {
        std::string near = peek().kind == Token::Kind::End ? "end of input" : "'" + peek().text + "'";
        if (peek().kind == Token::Kind::Int) {
            near = std::to_string(peek().num);
        }
        return Error(ErrorCode::SyntaxError, what + " near " + near, peek().loc);
    }

    bool accept(std::string_view punct) {
        if (peek().kind == Token::Kind::Punct && peek().text == punct) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(std::string_view punct) {
        if (!accept(punct)) {
            throw error("expected '" + std::string(punct) + "'");
        }
    }

    bool accept_keyword(std::string_view kw) {
        if (at_keyword(kw)) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect_keyword(std::string_view kw) {
        if (!accept_keyword(kw)) {
            throw error("expected '" + std::string(kw) + "'");
        }
    }

    std::string expect_ident(std::string_view what) {
        if (peek().kind != Token::Kind::Ident) {
            throw error("expected " + std::string(what));
        }
        return toks_[pos_++].text;
    }

private:
    ElementKey parse_key() {
        expect("@");
        if (accept("?")) {
            return ElementKey{"k" + std::to_string(next_key_++)};
        }
        return ElementKey{expect_ident("element key")};
    }

    Reference parse_reference() {
        expect_keyword("ref");
        Reference r;
        r.producer = expect_ident("producer name");
        expect("{");
        while (!accept("}")) {
            const bool is_type = at_keyword("type");
            if (!accept_keyword("type") && !accept_keyword("fun")) {
                throw error("expected 'type' or 'fun' in reference");
            }
            std::string name = expect_ident("referenced name");
            ElementKey k = parse_key();
            expect(":");
            Type t = parse_type();
            accept(";");
            if (is_type) {
                r.items.emplace_back(TypeRef{r.producer, std::move(name), std::move(k), std::move(t)});
            } else {
                r.items.emplace_back(ValueRef{r.producer, std::move(name), std::move(k), std::move(t)});
            }
        }
        return r;
    }

    Definition parse_definition() {
        const SourceLoc loc = peek().loc;
        if (accept_keyword("type")) {
            std::string name = expect_ident("type name");
            ElementKey k = parse_key();
            expect("=");
            Type body = parse_type();
            accept(";");
            return TypeDef{std::move(k), std::move(name), std::move(body), loc};
        }
        if (accept_keyword("fun")) {
            std::string name = expect_ident("function name");
            ElementKey k = parse_key();
            expect(":");
            Type t = parse_type();
            expect("=");
            Expr body = parse_expr();
            accept(";");
            return ValueDef{std::move(k), std::move(name), std::move(t), std::move(body), loc};
        }
        throw error("expected 'type' or 'fun' definition");
    }

    Type parse_atype() {
        if (accept_keyword("int")) {
            return Type::integer();
        }
        if (accept_keyword("string")) {
            return Type::string();
        }
        if (accept("(")) {
            Type t = parse_type();
            expect(")");
            return t;
        }
        if (accept("{")) {
            std::vector<Field> fields;
            if (!accept("}")) {
                do {
                    std::string label = expect_ident("field label");
                    ElementKey k = parse_key();
                    expect(":");
                    fields.push_back(Field{std::move(label), std::move(k), parse_type()});
                } while (accept(","));
                expect("}");
            }
            return Type::record(std::move(fields));
        }
        if (peek().kind == Token::Kind::Ident) {
            std::string name = expect_ident("type name");
            ElementKey k = parse_key();
            return Type::named(std::move(name), std::move(k));
        }
        throw error("expected a type");
    }

    std::vector<FieldInit> parse_inits() {
        std::vector<FieldInit> fields;
        if (accept("}")) {
            return fields;
        }
        do {
            std::string label = expect_ident("field label");
            ElementKey k = parse_key();
            expect("=");
            fields.push_back(FieldInit{std::move(label), std::move(k), parse_expr()});
        } while (accept(","));
        expect("}");
        return fields;
    }

    Expr parse_postfix() {
        Expr e = parse_primary();
        for (;;) {
            if (accept("(")) {
                Expr arg = parse_expr();
                expect(")");
                e = ex::apply(std::move(e), std::move(arg));
            } else if (accept(".")) {
                e = ex::select(std::move(e), expect_ident("field label"));
            } else if (accept("{")) {
                e = ex::update(std::move(e), parse_inits());
            } else {
                return e;
            }
        }
    }

    Expr parse_primary() {
        const Token& t = peek();
        switch (t.kind) {
        case Token::Kind::Int:
            ++pos_;
            return ex::num(t.num);
        case Token::Kind::Str:
            ++pos_;
            return ex::str(t.text);
        case Token::Kind::Ident: {
            std::string name = toks_[pos_++].text;
            if (std::find(bound_.rbegin(), bound_.rend(), name) != bound_.rend()) {
                return ex::var(std::move(name));
            }
            return ex::fun(std::move(name));
        }
        default:
            break;
        }
        if (accept("(")) {
            Expr e = parse_expr();
            expect(")");
            return e;
        }
        if (accept("{")) {
            return ex::record(parse_inits());
        }
        if (peek().text == "\\") {
            return parse_expr();
        }
        throw error("expected an expression");
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::vector<std::string> bound_;
    std::uint64_t next_key_ = 1;
};

} // namespace detail

inline Module parse_module(std::string_view src) {
    detail::Parser p(src);
    Module m = p.parse_module();
    if (!p.at_end()) {
        throw p.error("trailing input after module");
    }
    return m;
}

/// All modules in a `.cem` unit (one or more `module` blocks).
inline std::vector<Module> parse_modules(std::string_view src) {
    detail::Parser p(src);
    std::vector<Module> out;
    while (!p.at_end()) {
        out.push_back(p.parse_module());
    }
    return out;
}

inline Type parse_type(std::string_view src) {
    detail::Parser p(src);
    Type t = p.parse_type();
    if (!p.at_end()) {
        throw p.error("trailing input after type");
    }
    validate_type(t);
    return t;
}

inline Expr parse_expr(std::string_view src) {
    detail::Parser p(src);
    Expr e = p.parse_expr();
    if (!p.at_end()) {
        throw p.error("trailing input after expression");
    }
    return e;
}

/// A system file: module blocks plus service blocks naming them. Services
/// that omit a proxy for a referenced producer get the just-deployed empty
/// proxy stamped with the service's own label.
inline System parse_system(std::string_view src) {
    detail::Parser p(src);
    std::vector<Module> modules;
    std::vector<detail::Parser::ServiceDecl> decls;
    while (!p.at_end()) {
        if (p.at_keyword("module")) {
            modules.push_back(p.parse_module());
        } else if (p.at_keyword("service")) {
            decls.push_back(p.parse_service());
        } else {
            throw p.error("expected 'module' or 'service'");
        }
    }
    System u;
    std::set<std::string> seen_modules;
    for (const auto& m : modules) {
        if (!seen_modules.insert(m.name).second) {
            throw Error(ErrorCode::DuplicateName, "module " + m.name + " defined twice");
        }
    }
    std::set<std::uint64_t> thread_ids;
    for (auto& d : decls) {
        auto it = std::find_if(modules.begin(), modules.end(),
                               [&](const Module& m) { return m.name == d.module; });
        if (it == modules.end()) {
            throw Error(ErrorCode::UnresolvedName, "service " + d.module + " has no module", d.loc);
        }
        if (u.find(d.module) != nullptr) {
            throw Error(ErrorCode::DuplicateName, "service " + d.module + " declared twice", d.loc);
        }
        Service s;
        s.module = *it;
        s.label = d.label;
        for (auto& proxy : d.proxies) {
            if (s.module.ref_for(proxy.producer) == nullptr) {
                throw Error(ErrorCode::SyntaxError,
                            "service " + d.module + " has a proxy for " + proxy.producer
                              + " but no reference to it",
                            d.loc);
            }
            if (s.proxy_for(proxy.producer) != nullptr) {
                throw Error(ErrorCode::DuplicateName,
                            "two proxies for " + proxy.producer + " in " + d.module, d.loc);
            }
            s.proxies.push_back(std::move(proxy));
        }
        for (const auto& r : s.module.refs) {
            if (s.proxy_for(r.producer) == nullptr) {
                s.proxies.push_back(Proxy::ready(r.producer, {}, s.label));
            }
        }
        for (auto& t : d.threads) {
            if (!thread_ids.insert(t.id.value).second) {
                throw Error(ErrorCode::DuplicateName, "thread " + t.id.str() + " declared twice",
                            d.loc);
            }
            u.next_thread = std::max(u.next_thread, t.id.value + 1);
        }
        s.threads = std::move(d.threads);
        auto bump = [&](const DeployLabel& l) {
            if (auto n = numeric_suffix(l.id)) {
                u.next_label = std::max(u.next_label, *n + 1);
            }
        };
        bump(s.label);
        for (const auto& proxy : s.proxies) {
            bump(proxy.label);
        }
        u.services.push_back(std::move(s));
    }
    return u;
}

/// Parses a value literal (`1`, `"x"`, `{Id@k2 = 1, Name@k3 = "HDD"}`).
inline Value parse_value(std::string_view src) {
    Expr e = parse_expr(src);
    auto convert = [](const auto& self, const Expr& x) -> Value {
        switch (x->kind) {
        case ExprNode::Kind::Num:
            return Value::integer(x->num);
        case ExprNode::Kind::Str:
            return Value::string(x->text);
        case ExprNode::Kind::Record: {
            std::vector<KnownField> known;
            for (const auto& f : x->fields) {
                if (std::any_of(known.begin(), known.end(),
                                [&](const KnownField& g) { return g.key == f.key; })) {
                    fail(ErrorCode::DuplicateKey, "key " + f.key.id + " appears twice in literal");
                }
                known.push_back(KnownField{f.label, f.key, self(self, f.value)});
            }
            return Value::record(std::move(known));
        }
        default:
            fail(ErrorCode::SyntaxError, "expected a literal value");
        }
    };
    return convert(convert, e);
}

// ---------------------------------------------------------------------------
// Rendering

inline std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    return out + "\"";
}

std::string render_expr(const Expr& e, int level = 0);

inline std::string render_value(const Value& v) {
    switch (v.kind) {
    case Value::Kind::Int:
        return std::to_string(v.num);
    case Value::Kind::Str:
        return quote(v.str);
    case Value::Kind::Closure:
        return "\\" + v.str + " : " + render_type(v.param_type) + " . " + render_expr(v.body);
    case Value::Kind::Record: {
        std::string out = "{";
        bool first = true;
        for (const auto& f : v.known) {
            out += (first ? "" : ", ") + f.label + "@" + f.key.id + " = " + render_value(f.value);
            first = false;
        }
        for (const auto& f : v.unknown) {
            out += (first ? "" : ", ") + std::string("#") + f.key.id + " = " + render_value(f.value);
            first = false;
        }
        return out + "}";
    }
    }
    return "?";
}

namespace detail {

inline std::string render_inits(const std::vector<FieldInit>& fields) {
    std::string out = "{";
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) {
            out += ", ";
        }
        out += fields[i].label + "@" + fields[i].key.id + " = " + render_expr(fields[i].value);
    }
    return out + "}";
}

} // namespace detail

// Levels: 0 lambda, 1 sum, 2 postfix.
inline std::string render_expr(const Expr& e, int level) {
    using K = ExprNode::Kind;
    auto wrap = [&](int own, std::string s) { return level > own ? "(" + s + ")" : s; };
    switch (e->kind) {
    case K::Num:
        return std::to_string(e->num);
    case K::Str:
        return quote(e->text);
    case K::FunName:
    case K::Var:
        return e->text;
    case K::Add:
        return wrap(1, render_expr(e->lhs, 1) + " + " + render_expr(e->rhs, 2));
    case K::Lambda:
        return wrap(0, "\\" + e->text + " : " + render_type(e->type) + " . " + render_expr(e->lhs, 0));
    case K::Apply:
        return render_expr(e->lhs, 2) + "(" + render_expr(e->rhs, 0) + ")";
    case K::Record:
        return detail::render_inits(e->fields);
    case K::Select:
        return render_expr(e->lhs, 2) + "." + e->text;
    case K::Update:
        return render_expr(e->lhs, 2) + " " + detail::render_inits(e->fields);
    case K::Await:
        return e->thread.str() + "?";
    case K::Convert:
        return "convert[" + render_type(e->type) + " => " + render_type(e->target) + "]("
               + render_expr(e->lhs, 0) + ")";
    case K::Val: {
        std::string s = render_value(*e->value);
        return e->value->kind == Value::Kind::Closure ? wrap(0, s) : s;
    }
    }
    return "?";
}

inline std::string render_module(const Module& m) {
    std::ostringstream out;
    out << "module " << m.name << " {\n";
    if (!m.refs.empty()) {
        out << "  refs {\n";
    }
    for (const auto& r : m.refs) {
        out << "    ref " << r.producer << " {\n";
        for (const auto& item : r.items) {
            const bool is_type = std::holds_alternative<TypeRef>(item);
            out << "      " << (is_type ? "type " : "fun ") << name_of(item) << "@"
                << key_of(item).id << " : " << render_type(type_of(item)) << ";\n";
        }
        out << "    }\n";
    }
    if (!m.refs.empty()) {
        out << "  }\n";
    }
    if (!m.defs.empty()) {
        out << "  defs {\n";
    }
    for (const auto& d : m.defs) {
        if (const auto* t = std::get_if<TypeDef>(&d)) {
            out << "    type " << t->name << "@" << t->key.id << " = " << render_type(t->body)
                << ";\n";
        } else {
            const auto& v = std::get<ValueDef>(d);
            out << "    fun " << v.name << "@" << v.key.id << " : " << render_type(v.type) << " = "
                << render_expr(v.body) << ";\n";
        }
    }
    if (!m.defs.empty()) {
        out << "  }\n";
    }
    out << "}\n";
    return out.str();
}

inline std::string render_signature_entries(const Signature& sig, const std::string& indent) {
    std::string out;
    for (const auto& [k, e] : sig.entries) {
        if (e.kind == ElementKind::Type) {
            out += indent + "type " + e.name + "@" + k.id + " = " + render_type(e.type) + ";\n";
        } else {
            out += indent + "fun " + e.name + "@" + k.id + " : " + render_type(e.type) + ";\n";
        }
    }
    return out;
}

/// Renders modules then services. Threads holding runtime-only forms
/// (awaits, conversions, values) render for display but do not re-parse.
inline std::string render_system(const System& u) {
    std::string out;
    for (const auto& s : u.services) {
        out += render_module(s.module);
        out += "\n";
    }
    for (const auto& s : u.services) {
        out += "service " + s.name() + " @ " + s.label.id + " {\n";
        for (const auto& p : s.proxies) {
            if (p.is_ready()) {
                out += "  proxy " + p.producer + " @ " + p.label.id + " {\n";
                for (const auto& vp : p.entries) {
                    out += "    " + vp.local + " -> " + vp.remote + " : " + render_type(vp.type) + ";\n";
                }
            } else {
                out += "  outdated " + p.producer + " @ " + p.label.id + " {\n";
                out += render_signature_entries(p.signature, "    ");
            }
            out += "  }\n";
        }
        for (const auto& t : s.threads) {
            out += "  thread " + t.id.str() + " = " + render_expr(t.expr) + ";\n";
        }
        out += "}\n";
    }
    return out;
}

} // namespace cem
