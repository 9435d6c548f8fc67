package bank;

public class Account {
    private long cents;
    private final String owner;

    public Account(String owner) {
        this(owner, 0);
    }

    public Account(String owner, long cents) {
        this.owner = owner;
        this.cents = cents;
    }

    public synchronized void deposit(long amount) {
        if (amount <= 0) throw new IllegalArgumentException("amount must be positive");
        cents += amount;
    }

    public synchronized boolean withdraw(long amount) {
        if (amount > cents) return false;
        cents -= amount;
        return true;
    }

    public String getOwner() { return owner; }
}
