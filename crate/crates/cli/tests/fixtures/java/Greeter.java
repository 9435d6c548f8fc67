public class Greeter {
    private static final String TEMPLATE = """
        Hello, %s!
        { not a brace block }
        """;

    public String greet(String name) {
        return TEMPLATE.formatted(name);
    }

    public String shout(String name) {
        return greet(name).toUpperCase() + "!";
    }
}
