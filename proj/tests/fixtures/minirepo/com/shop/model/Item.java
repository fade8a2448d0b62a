package com.shop.model;

public class Item {
    public static final String CURRENCY = "EUR";
    private final String name;
    private final int price;
    private int quantity;

    public Item(String name, int price) {
        this.name = name;
        this.price = price;
    }

    public int getPrice() {
        return price;
    }

    public int getQuantity() {
        return quantity;
    }

    public String getName() {
        return name;
    }
}
