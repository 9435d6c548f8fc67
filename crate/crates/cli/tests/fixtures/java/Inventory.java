package shop;

import java.util.*;
import java.util.stream.Collectors;

public class Inventory {
    private final Map<String, Integer> stock = new TreeMap<>();

    public void add(String item, int qty) {
        stock.merge(item, qty, Integer::sum);
    }

    public boolean remove(String item, int qty) {
        Integer have = stock.get(item);
        if (have == null || have < qty) {
            return false;
        }
        if (have == qty) stock.remove(item);
        else stock.put(item, have - qty);
        return true;
    }

    public List<String> lowStock(int threshold) {
        return stock.entrySet().stream()
                .filter(e -> e.getValue() < threshold)
                .map(Map.Entry::getKey)
                .collect(Collectors.toList());
    }
}
