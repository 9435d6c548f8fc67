public class Outer {
    private int x = 1;

    class Inner {
        int twice() {
            return x * 2;
        }
    }

    static class Nested {
        static int square(int v) {
            return v * v;
        }
    }

    public int run() {
        Runnable r = new Runnable() {
            @Override
            public void run() {
                x++;
            }
        };
        r.run();
        return new Inner().twice() + Nested.square(x);
    }
}
