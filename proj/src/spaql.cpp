#include "spq/spaql.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace spq::spaql {

namespace {

std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

struct Token {
    enum Kind { Word, Number, Sym, End } kind = End;
    std::string text;  // words uppercased; syms verbatim
    std::string raw;   // original spelling (identifiers)
    double num = 0;
    int line = 1, col = 1;
};

struct Lexer {
    std::vector<Token> toks;
    size_t pos = 0;

    explicit Lexer(const std::string& text) {
        int line = 1, col = 1;
        size_t i = 0;
        auto push = [&](Token t) { toks.push_back(std::move(t)); };
        while (i < text.size()) {
            char c = text[i];
            if (c == '\n') { ++line; col = 1; ++i; continue; }
            if (std::isspace(static_cast<unsigned char>(c))) { ++col; ++i; continue; }
            if (c == '-' && i + 1 < text.size() && text[i + 1] == '-') {  // comment to EOL
                while (i < text.size() && text[i] != '\n') ++i;
                continue;
            }
            Token t;
            t.line = line;
            t.col = col;
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                size_t j = i;
                while (j < text.size() &&
                       (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
                    ++j;
                t.kind = Token::Word;
                t.raw = text.substr(i, j - i);
                t.text = upper(t.raw);
                col += static_cast<int>(j - i);
                i = j;
            } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
                       ((c == '-' || c == '+') && i + 1 < text.size() &&
                        (std::isdigit(static_cast<unsigned char>(text[i + 1])) || text[i + 1] == '.'))) {
                size_t j = i;
                const char* start = text.c_str() + i;
                char* end = nullptr;
                double v = std::strtod(start, &end);
                j = i + static_cast<size_t>(end - start);
                t.kind = Token::Number;
                t.num = v;
                t.text = text.substr(i, j - i);
                col += static_cast<int>(j - i);
                i = j;
            } else {
                t.kind = Token::Sym;
                if ((c == '<' || c == '>' || c == '!') && i + 1 < text.size() &&
                    (text[i + 1] == '=' || (c == '<' && text[i + 1] == '>'))) {
                    t.text = text.substr(i, 2);
                    i += 2;
                    col += 2;
                } else {
                    t.text = std::string(1, c);
                    ++i;
                    ++col;
                }
                if (t.text == "<>") t.text = "!=";
            }
            push(std::move(t));
        }
        Token end;
        end.kind = Token::End;
        end.line = line;
        end.col = col;
        push(end);
    }

    const Token& peek(size_t k = 0) const { return toks[std::min(pos + k, toks.size() - 1)]; }
    Token next() { return toks[std::min(pos++, toks.size() - 1)]; }
    bool word(const char* w) {
        if (peek().kind == Token::Word && peek().text == w) { ++pos; return true; }
        return false;
    }
    void expect_word(const char* w) {
        const Token& t = peek();
        if (t.kind != Token::Word || t.text != w)
            throw ParseError("expected '" + std::string(w) + "', found '" + t.text + "'", t.line, t.col);
        ++pos;
    }
    void expect_sym(const char* s) {
        const Token& t = peek();
        if (t.kind != Token::Sym || t.text != s)
            throw ParseError("expected '" + std::string(s) + "', found '" + t.text + "'", t.line, t.col);
        ++pos;
    }
    std::string ident() {
        const Token& t = peek();
        if (t.kind != Token::Word)
            throw ParseError("expected identifier, found '" + t.text + "'", t.line, t.col);
        ++pos;
        return t.raw;
    }
    double number() {
        const Token& t = peek();
        if (t.kind != Token::Number)
            throw ParseError("expected number, found '" + t.text + "'", t.line, t.col);
        ++pos;
        return t.num;
    }
};

bool is_cmp(const Token& t) {
    return t.kind == Token::Sym &&
           (t.text == "<=" || t.text == ">=" || t.text == "<" || t.text == ">" || t.text == "=" ||
            t.text == "!=");
}

Dir parse_dir(Lexer& lx) {
    const Token& t = lx.peek();
    if (t.kind == Token::Sym && t.text == "<=") { lx.next(); return Dir::Leq; }
    if (t.kind == Token::Sym && t.text == ">=") { lx.next(); return Dir::Geq; }
    throw ParseError("expected '<=' or '>='", t.line, t.col);
}

Pred parse_pred_or(Lexer& lx);

Pred parse_pred_atom(Lexer& lx) {
    if (lx.word("NOT")) {
        Pred p;
        p.kind = Pred::Not;
        p.kids.push_back(parse_pred_atom(lx));
        return p;
    }
    if (lx.peek().kind == Token::Sym && lx.peek().text == "(") {
        lx.next();
        Pred p = parse_pred_or(lx);
        lx.expect_sym(")");
        return p;
    }
    Pred p;
    p.kind = Pred::Cmp;
    p.attr = lx.ident();
    const Token& t = lx.peek();
    if (!is_cmp(t)) throw ParseError("expected comparison operator", t.line, t.col);
    p.op = t.text;
    lx.next();
    p.value = lx.number();
    return p;
}

Pred parse_pred_and(Lexer& lx) {
    Pred first = parse_pred_atom(lx);
    if (!(lx.peek().kind == Token::Word && lx.peek().text == "AND")) return first;
    Pred p;
    p.kind = Pred::And;
    p.kids.push_back(std::move(first));
    while (lx.word("AND")) p.kids.push_back(parse_pred_atom(lx));
    return p;
}

Pred parse_pred_or(Lexer& lx) {
    Pred first = parse_pred_and(lx);
    if (!(lx.peek().kind == Token::Word && lx.peek().text == "OR")) return first;
    Pred p;
    p.kind = Pred::Or;
    p.kids.push_back(std::move(first));
    while (lx.word("OR")) p.kids.push_back(parse_pred_and(lx));
    return p;
}

std::string parse_sum_attr(Lexer& lx) {
    lx.expect_word("SUM");
    lx.expect_sym("(");
    std::string a = lx.ident();
    lx.expect_sym(")");
    return a;
}

void check_prob(double p, const Token& at) {
    if (!(p > 0.0 && p < 1.0)) throw ParseError("probability must lie in (0,1)", at.line, at.col);
}

// one SUCH THAT item
Constraint parse_constraint(Lexer& lx) {
    const Token& at = lx.peek();
    if (lx.word("COUNT")) {
        lx.expect_sym("(");
        lx.expect_sym("*");
        lx.expect_sym(")");
        const Token& t = lx.peek();
        CountRel rel;
        if (t.kind == Token::Sym && t.text == "<=") rel = CountRel::Leq;
        else if (t.kind == Token::Sym && t.text == ">=") rel = CountRel::Geq;
        else if (t.kind == Token::Sym && t.text == "=") rel = CountRel::Eq;
        else throw ParseError("expected '<=', '>=' or '=' after COUNT(*)", t.line, t.col);
        lx.next();
        double s = lx.number();
        if (s < 0 || s != std::floor(s))
            throw ParseError("COUNT bound must be a nonnegative integer", t.line, t.col);
        return CCount{rel, s};
    }
    if (lx.word("EXPECTED")) {
        std::string attr = parse_sum_attr(lx);
        Dir dir = parse_dir(lx);
        double v = lx.number();
        if (lx.word("IN")) {
            const Token& t = lx.peek();
            risk::Tail tail;
            double alpha;
            if (lx.word("LOWER") || lx.word("LOWEST")) tail = risk::Tail::Lower;
            else if (lx.word("UPPER") || lx.word("HIGHEST")) tail = risk::Tail::Upper;
            else throw ParseError("expected LOWER/UPPER/LOWEST/HIGHEST", t.line, t.col);
            alpha = lx.number();
            if (lx.peek().kind == Token::Sym && lx.peek().text == "%") {
                lx.next();
                alpha /= 100.0;
                lx.expect_word("OF");
                lx.expect_word("SCENARIOS");
            } else if (lx.word("FRACTION")) {
                lx.expect_word("OF");
                lx.expect_word("SCENARIOS");
            } else {
                lx.expect_word("TAIL");
            }
            check_prob(alpha, at);
            return CCvar{attr, dir, v, tail, alpha};
        }
        return CExpSum{attr, dir, v};
    }
    if (at.kind == Token::Word && at.text == "SUM") {
        std::string attr = parse_sum_attr(lx);
        Dir dir = parse_dir(lx);
        double v = lx.number();
        if (lx.word("WITH")) {
            lx.expect_word("PROBABILITY");
            Dir pd = parse_dir(lx);
            double p = lx.number();
            check_prob(p, at);
            return CVaR{attr, dir, v, pd, p};
        }
        return CDetSum{attr, dir, v};
    }
    throw ParseError("expected a constraint (COUNT/SUM/EXPECTED SUM)", at.line, at.col);
}

}  // namespace

bool eval_pred(const Pred& p, const Tuple& t) {
    switch (p.kind) {
        case Pred::And:
            for (auto& k : p.kids)
                if (!eval_pred(k, t)) return false;
            return true;
        case Pred::Or:
            for (auto& k : p.kids)
                if (eval_pred(k, t)) return true;
            return false;
        case Pred::Not: return !eval_pred(p.kids[0], t);
        case Pred::Cmp: {
            auto it = t.det.find(p.attr);
            if (it == t.det.end()) throw SemanticError("WHERE references unknown attribute " + p.attr);
            double x = it->second;
            if (p.op == "<=") return x <= p.value;
            if (p.op == ">=") return x >= p.value;
            if (p.op == "<") return x < p.value;
            if (p.op == ">") return x > p.value;
            if (p.op == "=") return x == p.value;
            return x != p.value;
        }
    }
    return false;
}

QuerySpec parse(const std::string& text) {
    Lexer lx(text);
    QuerySpec q;
    lx.expect_word("SELECT");
    lx.expect_word("PACKAGE");
    lx.expect_sym("(");
    lx.expect_sym("*");
    lx.expect_sym(")");
    if (lx.word("AS")) q.alias = lx.ident();
    lx.expect_word("FROM");
    q.relation_name = lx.ident();
    if (lx.word("REPEAT")) {
        const Token& t = lx.peek();
        double r = lx.number();
        if (r < 0 || r != std::floor(r))
            throw ParseError("REPEAT bound must be a nonnegative integer", t.line, t.col);
        q.repeat_bound = static_cast<long>(r);
    }
    if (lx.word("WHERE")) q.predicate = parse_pred_or(lx);
    if (lx.word("SUCH")) {
        lx.expect_word("THAT");
        q.constraints.push_back(parse_constraint(lx));
        while (lx.word("AND")) q.constraints.push_back(parse_constraint(lx));
    }
    const Token& ot = lx.peek();
    if (lx.word("MAXIMIZE")) q.objective.sense = Sense::Maximize;
    else if (lx.word("MINIMIZE")) q.objective.sense = Sense::Minimize;
    else throw ParseError("expected MAXIMIZE or MINIMIZE", ot.line, ot.col);
    q.objective.expected = lx.word("EXPECTED");
    q.objective.attr = parse_sum_attr(lx);
    const Token& rest = lx.peek();
    if (rest.kind != Token::End) {
        if (rest.kind == Token::Word && (rest.text == "MAXIMIZE" || rest.text == "MINIMIZE"))
            throw ParseError("duplicate objective", rest.line, rest.col);
        throw ParseError("unexpected trailing input '" + rest.text + "'", rest.line, rest.col);
    }
    return q;
}

QuerySpec normalize(const QuerySpec& in) {
    QuerySpec q = in;
    for (auto& c : q.constraints) {
        if (auto* v = std::get_if<CVaR>(&c)) {
            // rewrite onto canonical VaR_alpha(sign*A) >= v
            if (v->dir == Dir::Leq && v->prob_dir == Dir::Leq) {
                v->neg = false; v->alpha = v->prob; v->v = v->bound;
            } else if (v->dir == Dir::Geq && v->prob_dir == Dir::Geq) {
                v->neg = false; v->alpha = 1.0 - v->prob; v->v = v->bound;
            } else if (v->dir == Dir::Geq && v->prob_dir == Dir::Leq) {
                v->neg = true; v->alpha = v->prob; v->v = -v->bound;
            } else {  // Leq bound, Geq prob
                v->neg = true; v->alpha = 1.0 - v->prob; v->v = -v->bound;
            }
            if (!(v->alpha > 0 && v->alpha < 1))
                throw SemanticError("canonical VaR tail probability outside (0,1)");
            // canonical surface spelling
            v->dir = v->neg ? Dir::Geq : Dir::Leq;
            v->bound = v->neg ? -v->v : v->v;
            v->prob_dir = Dir::Leq;
            v->prob = v->alpha;
        } else if (auto* cv = std::get_if<CCvar>(&c)) {
            if (cv->tail == risk::Tail::Lower && cv->dir == Dir::Geq) {
                cv->neg = false; cv->alpha = cv->tail_alpha; cv->v = cv->bound;
            } else if (cv->tail == risk::Tail::Upper && cv->dir == Dir::Leq) {
                // mean of highest alpha-fraction of A <= V  <=>  lower-tail CVaR of -A >= -V
                cv->neg = true; cv->alpha = cv->tail_alpha; cv->v = -cv->bound;
            } else {
                throw SemanticError(
                    "CVaR constraint has no linearizable canonical form (lower-tail upper bound / "
                    "upper-tail lower bound)");
            }
            cv->dir = cv->neg ? Dir::Leq : Dir::Geq;
            cv->bound = cv->neg ? -cv->v : cv->v;
            cv->tail = cv->neg ? risk::Tail::Upper : risk::Tail::Lower;
            cv->tail_alpha = cv->alpha;
        }
    }
    if (q.objective.sense == Sense::Minimize) q.objective.negated = true;
    q.objective.sense = Sense::Maximize;  // solvers maximize; `negated` carries the user sense
    q.normalized = true;
    return q;
}

static const char* dir_str(Dir d) { return d == Dir::Geq ? ">=" : "<="; }

static void render_pred(std::ostringstream& os, const Pred& p) {
    switch (p.kind) {
        case Pred::Cmp: os << p.attr << " " << p.op << " " << p.value; break;
        case Pred::Not:
            os << "NOT (";
            render_pred(os, p.kids[0]);
            os << ")";
            break;
        case Pred::And:
        case Pred::Or:
            for (size_t i = 0; i < p.kids.size(); ++i) {
                if (i) os << (p.kind == Pred::And ? " AND " : " OR ");
                os << "(";
                render_pred(os, p.kids[i]);
                os << ")";
            }
            break;
    }
}

std::string render(const QuerySpec& q) {
    std::ostringstream os;
    os.precision(17);
    os << "SELECT PACKAGE(*)";
    if (!q.alias.empty()) os << " AS " << q.alias;
    os << "\nFROM " << q.relation_name;
    if (q.repeat_bound) os << " REPEAT " << *q.repeat_bound;
    if (q.predicate) {
        os << "\nWHERE ";
        render_pred(os, *q.predicate);
    }
    if (!q.constraints.empty()) {
        os << "\nSUCH THAT\n";
        for (size_t i = 0; i < q.constraints.size(); ++i) {
            if (i) os << " AND\n";
            const auto& c = q.constraints[i];
            os << "  ";
            if (auto* cc = std::get_if<CCount>(&c)) {
                const char* rel = cc->rel == CountRel::Leq ? "<=" : cc->rel == CountRel::Geq ? ">=" : "=";
                os << "COUNT(*) " << rel << " " << cc->bound;
            } else if (auto* ds = std::get_if<CDetSum>(&c)) {
                os << "SUM(" << ds->attr << ") " << dir_str(ds->dir) << " " << ds->bound;
            } else if (auto* es = std::get_if<CExpSum>(&c)) {
                os << "EXPECTED SUM(" << es->attr << ") " << dir_str(es->dir) << " " << es->bound;
            } else if (auto* v = std::get_if<CVaR>(&c)) {
                os << "SUM(" << v->attr << ") " << dir_str(v->dir) << " " << v->bound
                   << " WITH PROBABILITY " << dir_str(v->prob_dir) << " " << v->prob;
            } else if (auto* cv = std::get_if<CCvar>(&c)) {
                os << "EXPECTED SUM(" << cv->attr << ") " << dir_str(cv->dir) << " " << cv->bound
                   << " IN " << (cv->tail == risk::Tail::Lower ? "LOWER" : "UPPER") << " "
                   << cv->tail_alpha << " TAIL";
            }
        }
    }
    bool minimize = q.objective.negated || q.objective.sense == Sense::Minimize;
    os << "\n" << (minimize ? "MINIMIZE" : "MAXIMIZE") << " ";
    if (q.objective.expected) os << "EXPECTED ";
    os << "SUM(" << q.objective.attr << ")\n";
    return os.str();
}

namespace {

std::string resolve_attr(const StochasticRelation& rel, const std::string& name) {
    std::string u = upper(name);
    for (auto& a : rel.det_attrs)
        if (upper(a) == u) return a;
    for (auto& a : rel.stoch_attrs)
        if (upper(a) == u) return a;
    throw SemanticError("unknown attribute '" + name + "' in relation " + rel.name);
}

void bind_pred(Pred& p, const StochasticRelation& rel) {
    if (p.kind == Pred::Cmp) {
        p.attr = resolve_attr(rel, p.attr);
        if (!rel.is_det_attr(p.attr))
            throw SemanticError("WHERE predicate on stochastic attribute " + p.attr);
        return;
    }
    for (auto& k : p.kids) bind_pred(k, rel);
}

}  // namespace

void bind(QuerySpec& q, const StochasticRelation& rel) {
    if (q.predicate) bind_pred(*q.predicate, rel);
    for (auto& c : q.constraints) {
        if (auto* ds = std::get_if<CDetSum>(&c)) {
            ds->attr = resolve_attr(rel, ds->attr);
            if (!rel.is_det_attr(ds->attr))
                throw SemanticError("SUM constraint on stochastic attribute " + ds->attr +
                                    " needs EXPECTED or a probability clause");
        } else if (auto* es = std::get_if<CExpSum>(&c)) {
            es->attr = resolve_attr(rel, es->attr);
            if (!rel.is_stoch_attr(es->attr))
                throw SemanticError("EXPECTED SUM on deterministic attribute " + es->attr);
        } else if (auto* v = std::get_if<CVaR>(&c)) {
            v->attr = resolve_attr(rel, v->attr);
            if (!rel.is_stoch_attr(v->attr))
                throw SemanticError("probabilistic constraint on deterministic attribute " + v->attr);
        } else if (auto* cv = std::get_if<CCvar>(&c)) {
            cv->attr = resolve_attr(rel, cv->attr);
            if (!rel.is_stoch_attr(cv->attr))
                throw SemanticError("CVaR constraint on deterministic attribute " + cv->attr);
        }
    }
    q.objective.attr = resolve_attr(rel, q.objective.attr);
    if (q.objective.expected && !rel.is_stoch_attr(q.objective.attr))
        throw SemanticError("EXPECTED objective on deterministic attribute " + q.objective.attr);
    if (!q.objective.expected && !rel.is_det_attr(q.objective.attr))
        throw SemanticError("objective SUM(" + q.objective.attr +
                            ") on a stochastic attribute needs EXPECTED");
}

std::vector<RiskParam> extract_risk_params(const QuerySpec& q) {
    if (!q.normalized) throw SemanticError("extract_risk_params requires a normalized query");
    std::vector<RiskParam> out;
    for (size_t i = 0; i < q.constraints.size(); ++i) {
        const auto& c = q.constraints[i];
        if (auto* v = std::get_if<CVaR>(&c))
            out.push_back({i, risk::RiskKind::VaR, v->attr, v->neg, v->alpha, v->v});
        else if (auto* cv = std::get_if<CCvar>(&c))
            out.push_back({i, risk::RiskKind::CvarLower, cv->attr, cv->neg, cv->alpha, cv->v});
    }
    return out;
}

}  // namespace spq::spaql
