#include <doctest.h>

#include <nlohmann/json.hpp>

#include "stagefix/contextscan.hpp"
#include "stagefix/corpus.hpp"

using namespace stagefix;

namespace {

const std::string kFixtures = STAGEFIX_FIXTURES;

const char* kTotal =
    "public int total() { int sum = 0; for (Item item : items) { "
    "sum += PriceUtil.discounted(item.getPrice(), DEFAULT_DISCOUNT); } "
    "return clamp(Math.min(sum, MAX_TOTAL)); }";

const JavaUnit& unit_named(const SourceScan& scan, const std::string& name) {
    for (const auto& u : scan.units) {
        if (u.qualified_name() == name) return u;
    }
    throw std::runtime_error("no unit " + name);
}

}  // namespace

TEST_CASE("parse_java_unit reads package, imports, fields and methods") {
    const auto unit = parse_java_unit(R"(package a.b;
import java.util.Map;
import static x.y.Z.CONST;
import p.q.*;
// class Fake { void no() {} }
public class Thing<T> extends Base implements Runnable {
    @Deprecated
    private final Map<String, Integer> counts = new HashMap<>();
    int a, b;
    static { init(); }
    public Thing() { super(); }
    @Override public void run() { String s = "}"; char c = '{'; }
    abstract int size(int x) throws IOException;
    class Inner { void hidden() {} }
}
)",
                                      "Thing.java");
    CHECK(unit.package_name == "a.b");
    CHECK(unit.class_name == "Thing");
    CHECK(unit.qualified_name() == "a.b.Thing");
    REQUIRE(unit.imports.size() == 3);
    CHECK(unit.imports[0].text == "import java.util.Map;");
    CHECK(unit.imports[1].is_static);
    CHECK(unit.imports[1].text == "import static x.y.Z.CONST;");
    CHECK(unit.imports[2].is_wildcard);

    std::vector<std::string> fields;
    for (const auto& f : unit.fields) fields.push_back(f.name);
    CHECK(fields == std::vector<std::string>{"counts", "a", "b"});

    std::vector<std::string> methods;
    for (const auto& m : unit.methods) methods.push_back(m.name);
    CHECK(methods == std::vector<std::string>{"Thing", "run", "size"});
    CHECK(unit.methods[2].signature == "abstract int size(int x) throws IOException");
    CHECK_FALSE(unit.methods[2].has_body);
}

TEST_CASE("unbalanced braces are reported with a position") {
    CHECK_THROWS_AS(parse_java_unit("class A { void f() { }", "A.java"), UnbalancedBraces);
    CHECK_THROWS_AS(parse_java_unit("class A { } }", "A.java"), UnbalancedBraces);
}

TEST_CASE("mini-repo golden context") {
    const auto scan = scan_source_tree(kFixtures + "/minirepo");
    CHECK(scan.failures.empty());
    REQUIRE(scan.units.size() == 5);
    const RepoIndex repo(scan.units);
    const auto at = locate_method(scan, kTotal);
    REQUIRE(at != std::string::npos);
    const auto& cart = scan.units[at];
    CHECK(cart.qualified_name() == "com.shop.cart.Cart");

    const auto cls = extract_class_context(cart, kTotal);
    CHECK(cls.class_imports == std::vector<std::string>{"import com.shop.model.Item;", "import com.shop.util.PriceUtil;",
                                                        "import static com.shop.util.Limits.MAX_TOTAL;"});
    CHECK(cls.class_globals == std::vector<std::string>{"private static final int DEFAULT_DISCOUNT = 5;",
                                                        "private final List<Item> items = new ArrayList<>();"});
    // total() itself is excluded; add() is not called by total()
    CHECK(cls.class_signatures == std::vector<std::string>{"private int clamp(int value)"});
    CHECK(cls.repo_globals.empty());

    const auto cross = extract_repo_context(cart, kTotal, repo);
    CHECK(cross.repo_globals == std::vector<TaggedSymbol>{{"Limits", "int MAX_TOTAL = 10000;"}});
    CHECK(cross.repo_signatures ==
          std::vector<TaggedSymbol>{{"Item", "public int getPrice()"},
                                    {"PriceUtil", "public static int discounted(int price, int percent)"}});

    // Rounding is only reachable through PriceUtil and must not contribute.
    const auto full = extract_context(cart, kTotal, repo);
    for (const auto& s : full.repo_signatures) CHECK(s.defining_class != "Rounding");
    for (const auto& s : full.repo_globals) CHECK(s.defining_class != "Rounding");

    CHECK(render_context(full) ==
          "Imports:\n"
          "  import com.shop.model.Item;\n"
          "  import com.shop.util.PriceUtil;\n"
          "  import static com.shop.util.Limits.MAX_TOTAL;\n"
          "Class globals:\n"
          "  private static final int DEFAULT_DISCOUNT = 5;\n"
          "  private final List<Item> items = new ArrayList<>();\n"
          "Class method signatures:\n"
          "  private int clamp(int value)\n"
          "Cross-file (Limits):\n"
          "  int MAX_TOTAL = 10000;\n"
          "Cross-file (Item):\n"
          "  public int getPrice()\n"
          "Cross-file (PriceUtil):\n"
          "  public static int discounted(int price, int percent)");
}

TEST_CASE("a three-deep import chain contributes only the first layer") {
    const auto scan = scan_source_tree(kFixtures + "/chain");
    REQUIRE(scan.units.size() == 4);
    const RepoIndex repo(scan.units);
    const std::string run = "public int run(Middle m) { return m.step(LEVEL) + m.deeper().deepest() + BOTTOM; }";
    const auto ctx = extract_context(unit_named(scan, "org.chain.a.Start"), run, repo);
    CHECK(ctx.class_imports == std::vector<std::string>{"import org.chain.b.Middle;"});
    CHECK(ctx.class_globals.empty());
    CHECK(ctx.class_signatures.empty());
    CHECK(ctx.repo_globals.empty());
    CHECK(ctx.repo_signatures == std::vector<TaggedSymbol>{{"Middle", "public int step(int level)"},
                                                           {"Middle", "public Deep deeper()"}});
}

TEST_CASE("wildcard and static imports resolve to units") {
    const auto scan = scan_source_tree(kFixtures + "/minirepo");
    const RepoIndex repo(scan.units);
    ImportDecl wildcard{"com.shop.util.*", "import com.shop.util.*;", false, true};
    CHECK(repo.resolve(wildcard).size() == 3);
    ImportDecl member{"com.shop.util.Limits.MAX_TOTAL", "import static com.shop.util.Limits.MAX_TOTAL;", true, false};
    REQUIRE(repo.resolve(member).size() == 1);
    CHECK(repo.resolve(member)[0]->class_name == "Limits");
    ImportDecl missing{"org.none.Gone", "import org.none.Gone;", false, false};
    CHECK(repo.resolve(missing).empty());
}

TEST_CASE("empty context renders the sentinel") {
    CHECK(render_context({}) == kNoContextSentinel);
}

TEST_CASE("context survives a corpus round trip") {
    const auto scan = scan_source_tree(kFixtures + "/minirepo");
    const RepoIndex repo(scan.units);
    BugInstance inst{"cart-1", "shop", kTotal, "public int total() { return 0; }", "int sum = 0;",
                     "clamp the cart total", std::nullopt, std::nullopt};
    inst.context = extract_context(scan.units[locate_method(scan, kTotal)], kTotal, repo);
    const auto back = parse_corpus(dump_corpus({inst}));
    REQUIRE(back.size() == 1);
    CHECK(back[0].context == inst.context);
}
