public class Counter {
    private int value;

    public void increment() {
        value++;
    }

    public void reset() {
        value = 0;
    }

    public int get() {
        return value;
    }
}
